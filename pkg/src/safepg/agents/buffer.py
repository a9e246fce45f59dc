# Fixed-capacity replay buffer with a lock-protected append/sample pair.
from __future__ import annotations

import threading

import numpy as np


class ReplayBuffer:
    """Ring buffer of (obs, action, cost, constraint_cost, next_obs, done)."""

    def __init__(self, capacity: int, obs_dim: int, action_dim: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._obs = np.zeros((capacity, obs_dim))
        self._act = np.zeros((capacity, action_dim))
        self._cost = np.zeros(capacity)
        self._dcost = np.zeros(capacity)
        self._next_obs = np.zeros((capacity, obs_dim))
        self._done = np.zeros(capacity, dtype=bool)
        self._size = 0
        self._head = 0
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return self._size

    def append(self, obs, action, cost, constraint_cost, next_obs, done):
        with self._lock:
            i = self._head
            self._obs[i] = obs
            self._act[i] = action
            self._cost[i] = cost
            self._dcost[i] = constraint_cost
            self._next_obs[i] = next_obs
            self._done[i] = done
            self._head = (i + 1) % self.capacity
            self._size = min(self._size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator) -> dict:
        with self._lock:
            if self._size < n:
                raise ValueError(f"buffer holds {self._size} < {n} transitions")
            idx = rng.integers(0, self._size, size=n)
            return {
                "obs": self._obs[idx].copy(),
                "actions": self._act[idx].copy(),
                "costs": self._cost[idx].copy(),
                "constraint_costs": self._dcost[idx].copy(),
                "next_obs": self._next_obs[idx].copy(),
                "done": self._done[idx].copy(),
            }
