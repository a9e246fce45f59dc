# Exact Bellman machinery for tabular CMDPs.
from __future__ import annotations

import numpy as np

from .types import DimensionMismatch, TabularCmdp, TabularPolicy


def _policy_matrices(cmdp: TabularCmdp, policy: TabularPolicy, h: np.ndarray):
    """Return (h_pi, P_pi): cost vector and transition matrix under the policy."""
    pi = policy.probs
    if pi.shape != (cmdp.n_states, cmdp.n_actions):
        raise DimensionMismatch(
            f"policy shape {pi.shape} does not match CMDP "
            f"({cmdp.n_states}, {cmdp.n_actions})"
        )
    h_pi = np.einsum("xa,xa->x", pi, h)
    P_pi = np.einsum("xa,xay->xy", pi, cmdp.transition)
    return h_pi, P_pi


def bellman_apply(
    cmdp: TabularCmdp, policy: TabularPolicy, h: np.ndarray, V: np.ndarray
) -> np.ndarray:
    """One application of the Bellman operator for cost matrix h under policy.

    T[V](x) = sum_a pi(a|x) [h(x,a) + gamma * sum_x' P(x'|x,a) V(x')].
    """
    h = np.asarray(h, dtype=float)
    V = np.asarray(V, dtype=float)
    if h.shape != (cmdp.n_states, cmdp.n_actions):
        raise DimensionMismatch(f"h must be (S, A), got {h.shape}")
    if V.shape != (cmdp.n_states,):
        raise DimensionMismatch(f"V must be (S,), got {V.shape}")
    h_pi, P_pi = _policy_matrices(cmdp, policy, h)
    return h_pi + cmdp.gamma * P_pi @ V


def _as_cost_matrix(cmdp: TabularCmdp, which: str) -> np.ndarray:
    if which == "cost":
        return cmdp.cost
    if which == "constraint":
        # State-dependent d(x) broadcast over actions.
        return np.repeat(cmdp.constraint_cost[:, None], cmdp.n_actions, axis=1)
    raise ValueError(f"which must be 'cost' or 'constraint', got {which!r}")


def policy_evaluate(
    cmdp: TabularCmdp, policy: TabularPolicy, which: str = "cost"
) -> np.ndarray:
    """Exact fixed point of the policy Bellman operator via linear solve."""
    h = _as_cost_matrix(cmdp, which)
    return policy_evaluate_matrix(cmdp, policy, h)


def policy_evaluate_matrix(
    cmdp: TabularCmdp, policy: TabularPolicy, h: np.ndarray
) -> np.ndarray:
    """Fixed point V = h_pi + gamma * P_pi V for an arbitrary cost matrix h."""
    h_pi, P_pi = _policy_matrices(cmdp, policy, np.asarray(h, dtype=float))
    A = np.eye(cmdp.n_states) - cmdp.gamma * P_pi
    return np.linalg.solve(A, h_pi)


def q_from_value(cmdp: TabularCmdp, h: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Q(x,a) = h(x,a) + gamma * sum_x' P(x'|x,a) V(x')."""
    return np.asarray(h, dtype=float) + cmdp.gamma * cmdp.transition @ np.asarray(V)


def state_occupancy(cmdp: TabularCmdp, policy: TabularPolicy) -> np.ndarray:
    """Unnormalized discounted occupancy o(x) = E[sum_t gamma^t 1{x_t = x}]
    from x0; sums to 1/(1-gamma)."""
    _, P_pi = _policy_matrices(cmdp, policy, cmdp.cost)
    e0 = np.zeros(cmdp.n_states)
    e0[cmdp.x0] = 1.0
    # o^T = e0^T (I - gamma P_pi)^{-1}
    A = np.eye(cmdp.n_states) - cmdp.gamma * P_pi
    return np.linalg.solve(A.T, e0)


def discounted_visitation(cmdp: TabularCmdp, policy: TabularPolicy) -> np.ndarray:
    """Normalized gamma-visiting distribution mu(x) = (1-gamma) * occupancy."""
    return (1.0 - cmdp.gamma) * state_occupancy(cmdp, policy)
