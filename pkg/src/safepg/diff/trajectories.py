# Rollout storage and return/advantage computations.
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Episode:
    """Per-step rollout arrays for one episode; states has one extra row for
    the terminal observation."""

    states: np.ndarray        # (T+1, obs_dim)
    actions: np.ndarray       # (T, act_dim)
    costs: np.ndarray         # (T,)
    constraint_costs: np.ndarray  # (T,)
    logprobs: np.ndarray      # (T,)
    terminals: np.ndarray     # (T,) bool; last entry marks episode end

    def __post_init__(self):
        T = len(self.actions)
        if len(self.states) != T + 1:
            raise ValueError("states must have length T+1")
        for name in ("costs", "constraint_costs", "logprobs", "terminals"):
            if len(getattr(self, name)) != T:
                raise ValueError(f"{name} must have length T")

    @property
    def length(self) -> int:
        return len(self.actions)


@dataclass
class TrajectoryBatch:
    episodes: list[Episode] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.episodes)

    @property
    def n_steps(self) -> int:
        return sum(ep.length for ep in self.episodes)

    def all_states(self) -> np.ndarray:
        return np.concatenate([ep.states[:-1] for ep in self.episodes])

    def all_actions(self) -> np.ndarray:
        return np.concatenate([ep.actions for ep in self.episodes])


def discounted_returns(
    batch: TrajectoryBatch, which: str = "cost", gamma: float = 0.99
) -> np.ndarray:
    """Per-episode discounted sum of costs (or constraint costs)."""
    if which not in ("cost", "constraint"):
        raise ValueError(f"which must be 'cost' or 'constraint', got {which!r}")
    out = np.empty(len(batch.episodes))
    for i, ep in enumerate(batch.episodes):
        h = ep.costs if which == "cost" else ep.constraint_costs
        out[i] = float(np.polynomial.polynomial.polyval(gamma, h))
    return out


def gae_advantages(
    costs: np.ndarray,
    values: np.ndarray,
    gamma: float,
    lam: float,
    terminal: bool = True,
) -> np.ndarray:
    """Generalized advantage estimates for one episode.

    values has length T+1; the bootstrap value is values[-1], forced to 0
    when the episode actually terminated.
    """
    costs = np.asarray(costs, dtype=float)
    values = np.asarray(values, dtype=float)
    T = len(costs)
    if len(values) != T + 1:
        raise ValueError("values must have length T+1")
    if not (0.0 <= lam <= 1.0):
        raise ValueError("lambda must lie in [0, 1]")
    v = values.copy()
    if terminal:
        v[-1] = 0.0
    deltas = costs + gamma * v[1:] - v[:-1]
    adv = np.empty(T)
    acc = 0.0
    for t in range(T - 1, -1, -1):
        acc = deltas[t] + gamma * lam * acc
        adv[t] = acc
    return adv


def batch_gae(
    batch: TrajectoryBatch,
    value_fn,
    gamma: float,
    lam: float,
    which: str = "cost",
) -> list[np.ndarray]:
    """GAE per episode using value_fn(states) for the per-step baselines."""
    out = []
    for ep in batch.episodes:
        values = np.asarray(value_fn(ep.states), dtype=float).reshape(-1)
        h = ep.costs if which == "cost" else ep.constraint_costs
        out.append(gae_advantages(h, values, gamma, lam, terminal=bool(ep.terminals[-1])))
    return out
