# Diagonal Gaussian policies over an MLP trunk.
#
# The trunk outputs 2 * action_dim values: the first half is the mean, the
# second half the log-variance (clamped for numerical stability). Actions are
# emitted unbounded; environments clamp to their action box and log-probs are
# computed pre-clamp.
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mlp import MlpSpec, ParamVector, ShapeError, init_params, mlp_backward, mlp_forward

LOGVAR_MIN = -5.0
LOGVAR_MAX = 2.0
LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class GaussianPolicy:
    """Stochastic policy N(mean(x), diag(std(x)^2)) with a shared trunk."""

    obs_dim: int
    action_dim: int
    hidden: tuple[int, ...] = (64, 32)
    activation: str = "tanh"

    @property
    def spec(self) -> MlpSpec:
        return MlpSpec(self.obs_dim, self.hidden, 2 * self.action_dim,
                       self.activation)

    def init(self, rng: np.random.Generator) -> ParamVector:
        return init_params(self.spec, rng)

    def mean_std(self, params: ParamVector, states: np.ndarray):
        out = mlp_forward(self.spec, params, states)
        mean = out[..., : self.action_dim]
        logvar = np.clip(out[..., self.action_dim :], LOGVAR_MIN, LOGVAR_MAX)
        return mean, np.exp(0.5 * logvar)

    def sample(self, params: ParamVector, states: np.ndarray,
               rng: np.random.Generator) -> np.ndarray:
        mean, std = self.mean_std(params, states)
        return mean + std * rng.standard_normal(mean.shape)


def gaussian_logprob(
    policy: GaussianPolicy,
    params: ParamVector,
    state: np.ndarray,
    action: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Diagonal-Gaussian log-density and its exact parameter gradient.

    Accepts a single (state, action) pair or batches; batched calls return
    per-sample log-probs and the summed parameter gradient.
    """
    state = np.asarray(state, dtype=float)
    action = np.asarray(action, dtype=float)
    if not (np.all(np.isfinite(state)) and np.all(np.isfinite(action))):
        raise ValueError("non-finite state or action")
    squeeze = state.ndim == 1
    X = state[None, :] if squeeze else state
    A = action[None, :] if squeeze else action
    if A.shape != (X.shape[0], policy.action_dim):
        raise ShapeError(f"action shape {A.shape} incompatible")

    out = mlp_forward(policy.spec, params, X)
    mean = out[:, : policy.action_dim]
    raw_logvar = out[:, policy.action_dim :]
    clamped = (raw_logvar <= LOGVAR_MIN) | (raw_logvar >= LOGVAR_MAX)
    logvar = np.clip(raw_logvar, LOGVAR_MIN, LOGVAR_MAX)
    inv_var = np.exp(-logvar)
    diff = A - mean
    logp = -0.5 * np.sum(diff * diff * inv_var + LOG_2PI + logvar, axis=1)

    g_mean = diff * inv_var
    g_logvar = 0.5 * (diff * diff * inv_var - 1.0)
    g_logvar[clamped] = 0.0  # hard clamp: no gradient outside the range
    gy = np.concatenate([g_mean, g_logvar], axis=1)
    grad, _ = mlp_backward(policy.spec, params, X, gy)
    if squeeze:
        return float(logp[0]), grad
    return logp, grad


def gaussian_logprob_batch(
    policy: GaussianPolicy,
    params: ParamVector,
    states: np.ndarray,
    actions: np.ndarray,
) -> np.ndarray:
    """Per-sample log-probs without gradients (cheap evaluation path)."""
    mean, std = policy.mean_std(params, states)
    diff = (actions - mean) / std
    return -0.5 * np.sum(diff * diff + LOG_2PI, axis=-1) - np.sum(np.log(std), axis=-1)


def score_vector(
    policy: GaussianPolicy,
    params: ParamVector,
    state: np.ndarray,
    action: np.ndarray,
) -> np.ndarray:
    """grad_theta log pi(action|state) for a single pair."""
    _, grad = gaussian_logprob(policy, params, state, action)
    return grad


def kl_diag_gaussian(
    mean1: np.ndarray, std1: np.ndarray, mean2: np.ndarray, std2: np.ndarray
) -> float:
    """Closed-form KL(N(mean1, std1^2) || N(mean2, std2^2)) for diagonals."""
    std1 = np.asarray(std1, dtype=float)
    std2 = np.asarray(std2, dtype=float)
    if np.any(std1 <= 0) or np.any(std2 <= 0):
        raise ValueError("standard deviations must be positive")
    mean1 = np.asarray(mean1, dtype=float)
    mean2 = np.asarray(mean2, dtype=float)
    var_ratio = (std1 / std2) ** 2
    return float(
        np.sum(np.log(std2 / std1) + 0.5 * (var_ratio + ((mean1 - mean2) / std2) ** 2 - 1.0))
    )
