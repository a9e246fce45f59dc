# Safety projections: the action-space safety layer (closed-form halfspace
# projection), the policy-parameter projection multiplier, and the safeguard /
# threshold-tightening rules.
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEGENERATE_NORM = 1e-12


@dataclass
class ProjectionResult:
    action: np.ndarray          # projected action (or mean for Gaussian)
    lam: float                  # multiplier lambda*(x) >= 0
    active: bool                # constraint active at the solution
    degenerate: bool = False    # ||g_L|| ~ 0; input returned unmodified
    std: np.ndarray | None = None  # projected stddev (Gaussian variant)
    std_floor_hit: bool = False


def safety_layer_project(
    action_unc: np.ndarray,
    baseline_action: np.ndarray,
    g_L: np.ndarray,
    epsilon_tilde: float,
) -> ProjectionResult:
    """Euclidean projection of an action onto the halfspace
    (a - baseline)^T g_L <= epsilon_tilde.

    lambda*(x) = ((g_L^T (a_unc - baseline) - eps) / (g_L^T g_L))_+ and the
    projected action is a_unc - lambda* g_L (minimal-norm correction).
    """
    a = np.asarray(action_unc, dtype=float)
    b = np.asarray(baseline_action, dtype=float)
    g = np.asarray(g_L, dtype=float)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(g))
            and np.isfinite(epsilon_tilde)):
        raise ValueError("non-finite projection inputs")
    gg = float(g @ g)
    if np.sqrt(gg) < DEGENERATE_NORM:
        return ProjectionResult(a.copy(), 0.0, False, degenerate=True)
    lam = (float(g @ (a - b)) - epsilon_tilde) / gg
    if lam <= 0.0:
        return ProjectionResult(a.copy(), 0.0, False)
    return ProjectionResult(a - lam * g, float(lam), True)


def safety_layer_project_gaussian(
    mean_unc: np.ndarray,
    std_unc: np.ndarray,
    baseline_action: np.ndarray,
    g_L: np.ndarray,
    epsilon_tilde: float,
    k: float = 1.0,
    std_floor: float = 1e-3,
) -> ProjectionResult:
    """Project a Gaussian action distribution onto the safe halfspace.

    The mean is projected as in safety_layer_project; the stddev components
    that point along g_L are shrunk so mean + k*std stays feasible, never
    below std_floor.
    """
    std = np.asarray(std_unc, dtype=float)
    if np.any(std <= 0):
        raise ValueError("std_unc must be positive")
    res = safety_layer_project(mean_unc, baseline_action, g_L, epsilon_tilde)
    if res.degenerate:
        res.std = std.copy()
        return res
    g = np.asarray(g_L, dtype=float)
    slack = epsilon_tilde - float(g @ (res.action - np.asarray(baseline_action)))
    slack = max(slack, 0.0)
    mask = np.abs(g) > DEGENERATE_NORM * max(1.0, float(np.linalg.norm(g)))
    spread = float(np.abs(g[mask]) @ std[mask]) * k
    new_std = std.copy()
    floor_hit = False
    if spread > slack and spread > 0.0:
        scale = slack / spread
        shrunk = np.maximum(std[mask] * scale, std_floor)
        floor_hit = bool(np.any(std[mask] * scale < std_floor))
        new_std[mask] = shrunk
    res.std = new_std
    res.std_floor_hit = floor_hit
    return res


def projection_jacobian(g_L: np.ndarray, active: bool) -> np.ndarray:
    """d(projected action)/d(unprojected action): I - [active] g g^T / ||g||^2."""
    g = np.asarray(g_L, dtype=float)
    n = g.shape[0]
    eye = np.eye(n)
    gg = float(g @ g)
    if not active or np.sqrt(gg) < DEGENERATE_NORM:
        return eye
    return eye - np.outer(g, g) / gg


def theta_projection_multiplier(
    grad_c: np.ndarray,
    grad_d: np.ndarray,
    h_solver,
    epsilon_tilde: float,
    beta: float,
) -> tuple[float, bool]:
    """Closed-form multiplier for the parameter-space projection step.

    lambda* = ((-beta*eps - grad_c^T H^{-1} grad_d) / (grad_d^T H^{-1} grad_d))_+
    h_solver(v) must return H^{-1} v for the (damped) curvature matrix H.
    Returns (lambda*, degenerate); degenerate when ||grad_d|| ~ 0.
    """
    gd = np.asarray(grad_d, dtype=float)
    if float(np.linalg.norm(gd)) < DEGENERATE_NORM:
        return 0.0, True
    hinv_gd = np.asarray(h_solver(gd), dtype=float)
    denom = float(gd @ hinv_gd)
    if denom <= DEGENERATE_NORM:
        return 0.0, True
    num = -beta * epsilon_tilde - float(np.asarray(grad_c, dtype=float) @ hinv_gd)
    return max(num / denom, 0.0), False


def safeguard_triggered(measured_constraint: float, d0: float,
                        margin: float = 0.05) -> bool:
    """Recovery predicate: the measured constraint return exceeds d0 by more
    than the configured margin."""
    return measured_constraint > d0 * (1.0 + margin)


def tighten_threshold(d0: float, delta: float) -> float:
    """Factor-of-safety threshold d0 * (1 - delta)."""
    if not (0.0 <= delta < 1.0):
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    return d0 * (1.0 - delta)
