# Adapter exposing a tabular CMDP through the rollout interface, for exact
# cross-checks of sampled estimators against linear-algebra values.
from __future__ import annotations

import numpy as np

from ..cmdp.types import TabularCmdp
from .point import EpisodeOver, StepResult


class GridworldEnv:
    """Samples transitions from a TabularCmdp; observations are one-hot."""

    def __init__(self, cmdp: TabularCmdp, episode_len: int = 100):
        self.cmdp = cmdp
        self.episode_len = episode_len
        self.obs_dim = cmdp.n_states
        self.n_actions = cmdp.n_actions
        self._t = None

    @property
    def state(self) -> int:
        return self._x

    def _one_hot(self, x: int) -> np.ndarray:
        v = np.zeros(self.cmdp.n_states)
        v[x] = 1.0
        return v

    def reset(self, seed: int) -> np.ndarray:
        self._rng = np.random.default_rng(seed)
        self._t = 0
        self._x = self.cmdp.x0
        return self._one_hot(self._x)

    def step(self, action: int) -> StepResult:
        if self._t is None:
            raise EpisodeOver("reset() must be called before step()")
        if self._t >= self.episode_len:
            raise EpisodeOver("episode is over; call reset()")
        a = int(action)
        cost = float(self.cmdp.cost[self._x, a])
        constraint = float(self.cmdp.constraint_cost[self._x])
        self._x = int(self._rng.choice(self.cmdp.n_states,
                                       p=self.cmdp.transition[self._x, a]))
        self._t += 1
        done = self._t >= self.episode_len
        return StepResult(self._one_hot(self._x), cost, constraint, done)
