# Fisher-information system solves via conjugate gradient.
#
# The Fisher matrix is estimated as the average outer product of score
# vectors over visited states (with actions sampled from the policy), plus
# damping * I; matrix-vector products never materialize the full matrix.
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussian import GaussianPolicy, score_vector
from .mlp import ParamVector


@dataclass
class FisherSolve:
    solution: np.ndarray
    converged: bool
    residual: float
    iterations: int


def solve_from_scores(
    scores: np.ndarray,
    grad: np.ndarray,
    damping: float,
    tol: float = 1e-8,
    max_iter: int = 500,
) -> FisherSolve:
    """Solve (S^T S / N + damping I) v = grad by conjugate gradient."""
    if damping <= 0:
        raise ValueError("damping must be positive")
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    grad = np.asarray(grad, dtype=float)
    N = scores.shape[0]

    def fvp(v: np.ndarray) -> np.ndarray:
        return scores.T @ (scores @ v) / N + damping * v

    x = np.zeros_like(grad)
    r = grad - fvp(x)
    p = r.copy()
    rs = float(r @ r)
    grad_norm = float(np.linalg.norm(grad))
    if grad_norm == 0.0:
        return FisherSolve(x, True, 0.0, 0)
    it = 0
    for it in range(1, max_iter + 1):
        Ap = fvp(p)
        alpha = rs / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rs_new = float(r @ r)
        if np.sqrt(rs_new) <= tol * max(grad_norm, 1.0):
            return FisherSolve(x, True, float(np.sqrt(rs_new)), it)
        p = r + (rs_new / rs) * p
        rs = rs_new
    return FisherSolve(x, False, float(np.sqrt(rs)), it)


def policy_scores(
    policy: GaussianPolicy,
    params: ParamVector,
    states: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Score vectors for actions sampled at each state; shape (N, n_params)."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    actions = policy.sample(params, states, rng)
    return np.stack(
        [score_vector(policy, params, s, a) for s, a in zip(states, actions)]
    )


def fisher_system_solve(
    policy: GaussianPolicy,
    params: ParamVector,
    states: np.ndarray,
    grad: np.ndarray,
    damping: float,
    rng: np.random.Generator,
    tol: float = 1e-8,
    max_iter: int = 500,
) -> FisherSolve:
    """Approximate H^{-1} grad with H the damped Fisher estimate."""
    scores = policy_scores(policy, params, states, rng)
    return solve_from_scores(scores, grad, damping, tol=tol, max_iter=max_iter)
