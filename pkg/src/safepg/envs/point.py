# Desk-scale point-mass CMDP environments.
#
# Dynamics are a double integrator (dt = 0.1 s, acceleration command in
# [-1, 1]^2, velocity clamp) with Gaussian observation/action noise; rewards
# and constraint costs follow the circle-running and apple/bomb gathering
# tasks. Costs are negated rewards so every module minimizes.
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class EpisodeOver(RuntimeError):
    """step() called after the episode finished."""


@dataclass
class StepResult:
    obs: np.ndarray
    cost: float
    constraint_cost: float
    done: bool


@dataclass(frozen=True)
class EnvConfig:
    episode_len: int = 65
    d0: float = 7.0
    dt: float = 0.1
    noise_std: float = 0.1
    vel_max: float = 2.0
    # Circle task
    circle_radius: float = 15.0
    x_limit: float = 2.5
    # Gather task
    arena_half: float = 5.0
    n_apples: int = 2
    n_bombs: int = 8
    touch_radius: float = 0.4
    spawn_free_radius: float = 1.0

    def __post_init__(self):
        if self.episode_len <= 0:
            raise ValueError("episode_len must be positive")
        if self.d0 < 0:
            raise ValueError("d0 must be nonnegative")


class _PointMass:
    """Shared double-integrator core with seeded noise streams."""

    action_dim = 2

    def __init__(self, config: EnvConfig):
        self.config = config
        self._rng = None
        self._t = None

    def _reset_core(self, seed: int):
        self._rng = np.random.default_rng(seed)
        self._t = 0
        self.pos = np.zeros(2)
        self.vel = np.zeros(2)

    def _advance(self, action: np.ndarray) -> None:
        if self._t is None:
            raise EpisodeOver("reset() must be called before step()")
        if self._t >= self.config.episode_len:
            raise EpisodeOver("episode is over; call reset()")
        a = np.clip(np.asarray(action, dtype=float), -1.0, 1.0)
        a = a + self.config.noise_std * self._rng.standard_normal(2)
        self.vel = np.clip(self.vel + self.config.dt * a,
                           -self.config.vel_max, self.config.vel_max)
        self.pos = self.pos + self.config.dt * self.vel
        self._t += 1

    @property
    def done(self) -> bool:
        return self._t is not None and self._t >= self.config.episode_len

    def _noise(self, n: int) -> np.ndarray:
        return self.config.noise_std * self._rng.standard_normal(n)


class PointCircleEnv(_PointMass):
    """Reward for counter-clockwise motion along a circle of radius 15 while
    keeping |x| <= 2.5; constraint cost is the indicator of leaving that band."""

    obs_dim = 4

    def reset(self, seed: int) -> np.ndarray:
        self._reset_core(seed)
        return self._observe()

    def _observe(self) -> np.ndarray:
        return np.concatenate([self.pos, self.vel]) + self._noise(4)

    def step(self, action: np.ndarray) -> StepResult:
        self._advance(action)
        x, y = self.pos
        dx, dy = self.vel
        r = self.config.circle_radius
        reward = (-dx * y + dy * x) / (1.0 + abs(np.hypot(x, y) - r))
        constraint = 1.0 if abs(x) > self.config.x_limit else 0.0
        return StepResult(self._observe(), -reward, constraint, self.done)


class PointGatherEnv(_PointMass):
    """Collect apples (+10 reward), avoid bombs (-10 reward); constraint cost
    counts bombs touched. Objects vanish on touch."""

    obs_dim = 10

    def __init__(self, config: EnvConfig | None = None):
        super().__init__(config or EnvConfig(episode_len=15, d0=2.0))

    def reset(self, seed: int) -> np.ndarray:
        self._reset_core(seed)
        cfg = self.config
        n = cfg.n_apples + cfg.n_bombs
        placed = []
        while len(placed) < n:
            p = self._rng.uniform(-cfg.arena_half, cfg.arena_half, size=2)
            if np.linalg.norm(p) > cfg.spawn_free_radius:
                placed.append(p)
        self.apples = [np.array(p) for p in placed[: cfg.n_apples]]
        self.bombs = [np.array(p) for p in placed[cfg.n_apples :]]
        return self._observe()

    def _nearest(self, objects: list[np.ndarray]) -> np.ndarray:
        if not objects:
            return np.zeros(2)
        dists = [np.linalg.norm(p - self.pos) for p in objects]
        return objects[int(np.argmin(dists))] - self.pos

    def _observe(self) -> np.ndarray:
        core = np.concatenate([
            self.pos,
            self.vel,
            self._nearest(self.apples),
            [float(len(self.apples))],
            self._nearest(self.bombs),
            [float(len(self.bombs))],
        ])
        noisy = core + self._noise(10)
        noisy[6] = core[6]  # object counts are exact
        noisy[9] = core[9]
        return noisy

    def step(self, action: np.ndarray) -> StepResult:
        self._advance(action)
        r = self.config.touch_radius
        apples_hit = [p for p in self.apples if np.linalg.norm(p - self.pos) <= r]
        bombs_hit = [p for p in self.bombs if np.linalg.norm(p - self.pos) <= r]
        self.apples = [p for p in self.apples if not any(p is q for q in apples_hit)]
        self.bombs = [p for p in self.bombs if not any(p is q for q in bombs_hit)]
        cost = -10.0 * len(apples_hit) + 10.0 * len(bombs_hit)
        return StepResult(self._observe(), cost, float(len(bombs_hit)), self.done)
