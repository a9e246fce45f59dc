# Safe Policy Iteration over tabular CMDPs.
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .bellman import policy_evaluate, q_from_value
from .lyapunov import (
    constraint_slack,
    epsilon_constant,
    epsilon_state_dependent,
    lyapunov_bundle,
)
from .types import CmdpError, TabularCmdp, TabularPolicy

_LP_TOL = 1e-12


def _min_cost_row(qv: np.ndarray, ql: np.ndarray, budget: float) -> np.ndarray:
    """Minimize pi . qv over the simplex subject to pi . ql <= budget.

    The optimum sits at a vertex of the feasible polytope, which has at most
    two nonzero entries (simplex face intersected with one halfspace), so
    exhaustive vertex enumeration is exact.
    """
    A = qv.shape[0]
    best_cost = np.inf
    best = None
    for a in range(A):
        if ql[a] <= budget + _LP_TOL and qv[a] < best_cost - _LP_TOL:
            best_cost = qv[a]
            best = np.zeros(A)
            best[a] = 1.0
    for i in range(A):
        for j in range(A):
            if i == j:
                continue
            # Mix with the ql-constraint tight: p*ql[i] + (1-p)*ql[j] = budget.
            denom = ql[i] - ql[j]
            if abs(denom) < _LP_TOL:
                continue
            p = (budget - ql[j]) / denom
            if p <= 0.0 or p >= 1.0:
                continue
            cost = p * qv[i] + (1.0 - p) * qv[j]
            if cost < best_cost - _LP_TOL:
                best_cost = cost
                best = np.zeros(A)
                best[i] = p
                best[j] = 1.0 - p
    if best is None:
        raise CmdpError("per-state LP infeasible despite nonnegative epsilon")
    best = np.clip(best, 0.0, None)
    return best / best.sum()


def spi_step(
    cmdp: TabularCmdp,
    current: TabularPolicy,
    epsilon_form: str = "state",
) -> TabularPolicy:
    """One safe policy-improvement step from a feasible current policy.

    Per state, minimizes expected Q_V subject to the Lyapunov constraint
    sum_a (pi - pi_B)(a|x) Q_L(x,a) <= eps(x).
    """
    if epsilon_form == "state":
        eps = epsilon_state_dependent(cmdp, current)
    elif epsilon_form == "constant":
        eps = np.full(cmdp.n_states, epsilon_constant(cmdp, current))
    else:
        raise ValueError(f"unknown epsilon_form {epsilon_form!r}")
    bundle = lyapunov_bundle(cmdp, current, eps)
    V = policy_evaluate(cmdp, current, which="cost")
    QV = q_from_value(cmdp, cmdp.cost, V)
    probs = np.empty_like(current.probs)
    for x in range(cmdp.n_states):
        budget = float(eps[x] + current.probs[x] @ bundle.QL[x])
        probs[x] = _min_cost_row(QV[x], bundle.QL[x], budget)
    return TabularPolicy(probs)


@dataclass
class SpiIterate:
    iteration: int
    cost: float
    constraint: float


def spi_run(
    cmdp: TabularCmdp,
    initial: TabularPolicy,
    max_iters: int = 200,
    tol: float = 1e-10,
    epsilon_form: str = "state",
) -> tuple[TabularPolicy, list[SpiIterate]]:
    """Iterate spi_step until the cost improvement at x0 falls below tol."""
    constraint_slack(cmdp, initial)  # raises InfeasibleBaseline
    policy = initial
    log: list[SpiIterate] = []

    def record(k: int, pi: TabularPolicy) -> SpiIterate:
        C = policy_evaluate(cmdp, pi, which="cost")[cmdp.x0]
        D = policy_evaluate(cmdp, pi, which="constraint")[cmdp.x0]
        row = SpiIterate(k, float(C), float(D))
        log.append(row)
        return row

    prev = record(0, policy)
    for k in range(1, max_iters + 1):
        policy = spi_step(cmdp, policy, epsilon_form=epsilon_form)
        cur = record(k, policy)
        if prev.cost - cur.cost < tol:
            break
        prev = cur
    return policy, log


class SafePolicyIteration(BaseEstimator):
    """Estimator-style wrapper around safe policy iteration.

    fit(cmdp) runs SPI from a feasible initial policy (uniform by default)
    and exposes the resulting policy, its exact values, and the iterate log.
    """

    def __init__(self, max_iters: int = 200, tol: float = 1e-10,
                 epsilon_form: str = "state"):
        self.max_iters = max_iters
        self.tol = tol
        self.epsilon_form = epsilon_form

    def fit(self, cmdp: TabularCmdp, initial: TabularPolicy | None = None):
        if initial is None:
            initial = TabularPolicy.uniform(cmdp.n_states, cmdp.n_actions)
        self.policy_, self.history_ = spi_run(
            cmdp, initial, self.max_iters, self.tol, self.epsilon_form
        )
        self.cost_ = self.history_[-1].cost
        self.constraint_ = self.history_[-1].constraint
        return self

    def predict(self, states) -> np.ndarray:
        """Most likely action per state index."""
        states = np.asarray(states, dtype=int)
        return np.argmax(self.policy_.probs[states], axis=-1)
