# Critic networks: state-action Q critics with target copies, and plain
# state-value heads for the on-policy algorithms. All are MLPs over flat
# parameter vectors; training is plain gradient descent on squared error so
# that zero targets with zero-initialized outputs stay exactly zero.
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..diff.mlp import MlpSpec, ParamVector, init_params, mlp_backward, mlp_forward


class QCritic:
    """Q(x, a) approximator on the concatenated (obs, action) input."""

    def __init__(self, obs_dim: int, action_dim: int,
                 hidden: tuple[int, ...] = (32, 32),
                 zero_output: bool = False):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.spec = MlpSpec(obs_dim + action_dim, hidden, 1, "tanh")
        self.zero_output = zero_output
        self.params: ParamVector | None = None
        self.target: ParamVector | None = None

    def setup(self, rng: np.random.Generator):
        self.params = init_params(self.spec, rng, zero_last_layer=self.zero_output)
        self.target = self.params.copy()

    def _cat(self, obs: np.ndarray, actions: np.ndarray) -> np.ndarray:
        return np.concatenate([np.atleast_2d(obs), np.atleast_2d(actions)], axis=1)

    def value(self, obs: np.ndarray, actions: np.ndarray,
              use_target: bool = False) -> np.ndarray:
        pv = self.target if use_target else self.params
        return mlp_forward(self.spec, pv, self._cat(obs, actions))[:, 0]

    def action_grad(self, obs: np.ndarray, action: np.ndarray) -> np.ndarray:
        """d Q / d action at a single (obs, action) pair."""
        x = np.concatenate([obs, action])
        _, gin = mlp_backward(self.spec, self.params, x, np.array([1.0]))
        return gin[self.obs_dim:]

    def train_step(self, obs: np.ndarray, actions: np.ndarray,
                   targets: np.ndarray, lr: float):
        """One gradient-descent step on mean squared Bellman error."""
        X = self._cat(obs, actions)
        pred = mlp_forward(self.spec, self.params, X)[:, 0]
        cot = ((pred - targets) / len(targets))[:, None]
        grad, _ = mlp_backward(self.spec, self.params, X, cot)
        self.params.values -= lr * grad

    def soft_update(self, tau: float):
        self.target.values += tau * (self.params.values - self.target.values)


class ValueCritic:
    """V(x) approximator for on-policy advantage baselines."""

    def __init__(self, obs_dim: int, hidden: tuple[int, ...] = (32, 32),
                 zero_output: bool = False):
        self.obs_dim = obs_dim
        self.spec = MlpSpec(obs_dim, hidden, 1, "tanh")
        self.zero_output = zero_output
        self.params: ParamVector | None = None

    def setup(self, rng: np.random.Generator):
        self.params = init_params(self.spec, rng, zero_last_layer=self.zero_output)

    def value(self, obs: np.ndarray) -> np.ndarray:
        return mlp_forward(self.spec, self.params, np.atleast_2d(obs))[:, 0]

    def fit_targets(self, obs: np.ndarray, targets: np.ndarray,
                    lr: float, epochs: int):
        X = np.atleast_2d(obs)
        for _ in range(epochs):
            pred = mlp_forward(self.spec, self.params, X)[:, 0]
            cot = ((pred - targets) / len(targets))[:, None]
            grad, _ = mlp_backward(self.spec, self.params, X, cot)
            self.params.values -= lr * grad


@dataclass
class CriticBundle:
    """Cost and constraint critics trained side by side.

    The constraint members start with zero output layers, so a task whose
    constraint cost is identically zero keeps them exactly zero and every
    safety correction derived from them vanishes.
    """

    qv: QCritic | None = None
    qw: QCritic | None = None
    v: ValueCritic | None = None
    w: ValueCritic | None = None

    def setup(self, rng: np.random.Generator):
        # Fixed order so the RNG stream is stable across algorithm variants.
        for critic in (self.qv, self.qw, self.v, self.w):
            if critic is not None:
                critic.setup(rng)
