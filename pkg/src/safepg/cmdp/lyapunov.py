# Auxiliary-cost construction and Lyapunov function assembly.
from __future__ import annotations

import numpy as np

from .bellman import policy_evaluate, policy_evaluate_matrix, q_from_value, state_occupancy
from .types import InfeasibleBaseline, LyapunovBundle, TabularCmdp, TabularPolicy

_FEAS_TOL = 1e-9
_OCC_FLOOR = 1e-12


def constraint_slack(cmdp: TabularCmdp, baseline: TabularPolicy) -> float:
    """d0 - D_piB(x0); raises if the baseline is infeasible."""
    D = policy_evaluate(cmdp, baseline, which="constraint")
    slack = cmdp.d0 - float(D[cmdp.x0])
    if slack < -_FEAS_TOL:
        raise InfeasibleBaseline(
            f"baseline constraint value {D[cmdp.x0]:.6g} exceeds threshold {cmdp.d0:.6g}"
        )
    return max(slack, 0.0)


def epsilon_constant(cmdp: TabularCmdp, baseline: TabularPolicy) -> float:
    """Largest constant auxiliary cost: (1-gamma) * (d0 - D_piB(x0))."""
    return (1.0 - cmdp.gamma) * constraint_slack(cmdp, baseline)


def epsilon_state_dependent(cmdp: TabularCmdp, baseline: TabularPolicy) -> np.ndarray:
    """One-hot auxiliary cost at the least-visited state.

    Maximizes sum_x eps(x) subject to the occupancy-weighted budget
    sum_x o(x) eps(x) <= d0 - D_piB(x0); the maximizer puts all budget on
    the state with the smallest discounted occupancy (ties: lowest index).
    """
    slack = constraint_slack(cmdp, baseline)
    occ = state_occupancy(cmdp, baseline)
    x_low = int(np.argmin(occ))
    eps = np.zeros(cmdp.n_states)
    eps[x_low] = slack / max(occ[x_low], _OCC_FLOOR)
    return eps


def epsilon_star_bound(
    cmdp: TabularCmdp, pi_a: TabularPolicy, pi_b: TabularPolicy
) -> np.ndarray:
    """Diagnostic per-state bound 2 * D_max * TV(pi_a(.|x), pi_b(.|x)) / (1-gamma)."""
    tv = 0.5 * np.abs(pi_a.probs - pi_b.probs).sum(axis=1)
    return 2.0 * cmdp.d_max * tv / (1.0 - cmdp.gamma)


def lyapunov_bundle(
    cmdp: TabularCmdp, baseline: TabularPolicy, epsilon: np.ndarray | float
) -> LyapunovBundle:
    """Assemble L, QL (with epsilon) and W, QW (epsilon = 0) under the baseline."""
    eps = np.broadcast_to(np.asarray(epsilon, dtype=float), (cmdp.n_states,)).copy()
    if np.any(eps < 0):
        raise ValueError("epsilon must be nonnegative")
    d_mat = np.repeat(cmdp.constraint_cost[:, None], cmdp.n_actions, axis=1)
    aug = d_mat + eps[:, None]
    L = policy_evaluate_matrix(cmdp, baseline, aug)
    QL = q_from_value(cmdp, aug, L)
    W = policy_evaluate(cmdp, baseline, which="constraint")
    QW = q_from_value(cmdp, d_mat, W)
    return LyapunovBundle(epsilon=eps, L=L, QL=QL, W=W, QW=QW)
