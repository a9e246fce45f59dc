# Tabular CMDP containers and JSON (de)serialization.
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

ROW_SUM_TOL = 1e-12


class CmdpError(ValueError):
    """Base class for structured CMDP errors."""


class DimensionMismatch(CmdpError):
    pass


class InfeasibleBaseline(CmdpError):
    """Raised when a baseline policy violates the constraint threshold."""


class Infeasible(CmdpError):
    """Raised when a CMDP admits no feasible policy."""


@dataclass(frozen=True)
class TabularCmdp:
    """Finite CMDP (P, c, d, gamma, x0, d0) amenable to exact linear algebra.

    transition has shape (n_states, n_actions, n_states) with rows on the
    simplex; cost is (n_states, n_actions); constraint_cost is state-dependent,
    shape (n_states,).
    """

    transition: np.ndarray
    cost: np.ndarray
    constraint_cost: np.ndarray
    gamma: float
    x0: int
    d0: float

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        c = np.asarray(self.cost, dtype=float)
        d = np.asarray(self.constraint_cost, dtype=float)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "cost", c)
        object.__setattr__(self, "constraint_cost", d)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise DimensionMismatch(f"transition must be (S, A, S), got {P.shape}")
        S, A = P.shape[:2]
        if c.shape != (S, A):
            raise DimensionMismatch(f"cost must be {(S, A)}, got {c.shape}")
        if d.shape != (S,):
            raise DimensionMismatch(f"constraint_cost must be ({S},), got {d.shape}")
        if not (0.0 <= self.gamma < 1.0):
            raise CmdpError(f"gamma must be in [0, 1), got {self.gamma}")
        if not (0 <= self.x0 < S):
            raise CmdpError(f"x0 out of range: {self.x0}")
        if self.d0 < 0:
            raise CmdpError(f"d0 must be nonnegative, got {self.d0}")
        if np.any(P < -ROW_SUM_TOL):
            raise CmdpError("transition probabilities must be nonnegative")
        rows = P.sum(axis=2)
        if np.max(np.abs(rows - 1.0)) > ROW_SUM_TOL:
            raise CmdpError("transition rows must sum to 1 within 1e-12")
        if np.any(c < 0) or np.any(d < 0):
            raise CmdpError("costs must be nonnegative")

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def c_max(self) -> float:
        return float(self.cost.max())

    @property
    def d_max(self) -> float:
        return float(self.constraint_cost.max())

    def to_json(self) -> str:
        doc = {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "transition": self.transition.ravel().tolist(),
            "cost": self.cost.ravel().tolist(),
            "constraint_cost": self.constraint_cost.tolist(),
            "gamma": self.gamma,
            "x0": self.x0,
            "d0": self.d0,
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "TabularCmdp":
        doc = json.loads(text)
        S, A = int(doc["n_states"]), int(doc["n_actions"])
        return cls(
            transition=np.asarray(doc["transition"], dtype=float).reshape(S, A, S),
            cost=np.asarray(doc["cost"], dtype=float).reshape(S, A),
            constraint_cost=np.asarray(doc["constraint_cost"], dtype=float),
            gamma=float(doc["gamma"]),
            x0=int(doc["x0"]),
            d0=float(doc["d0"]),
        )


@dataclass(frozen=True)
class TabularPolicy:
    """Markov stationary policy: probs[x, a] = pi(a|x), rows on the simplex."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", p)
        if p.ndim != 2:
            raise DimensionMismatch(f"policy must be 2-d, got shape {p.shape}")
        if np.any(p < -ROW_SUM_TOL):
            raise CmdpError("policy probabilities must be nonnegative")
        if np.max(np.abs(p.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise CmdpError("policy rows must sum to 1 within 1e-12")

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "TabularPolicy":
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    @classmethod
    def random(cls, n_states: int, n_actions: int, rng: np.random.Generator) -> "TabularPolicy":
        p = rng.dirichlet(np.ones(n_actions), size=n_states)
        p /= p.sum(axis=1, keepdims=True)
        return cls(p)


@dataclass(frozen=True)
class LyapunovBundle:
    """Lyapunov value L, its state-action form QL, and the epsilon-free
    constraint values W / QW, all under a fixed baseline policy."""

    epsilon: np.ndarray
    L: np.ndarray
    QL: np.ndarray
    W: np.ndarray
    QW: np.ndarray


def random_cmdp(
    n_states: int,
    n_actions: int,
    gamma: float,
    rng: np.random.Generator,
    d0: float | None = None,
) -> TabularCmdp:
    """Random dense instance; d0 defaults to a value feasible for the uniform
    policy so tests always start from a usable baseline."""
    P = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    P /= P.sum(axis=2, keepdims=True)
    c = rng.uniform(0.0, 1.0, size=(n_states, n_actions))
    d = rng.uniform(0.0, 1.0, size=n_states)
    if d0 is None:
        # Uniform policy's constraint value at x0, padded with slack.
        from .bellman import policy_evaluate  # local import avoids a cycle

        tmp = TabularCmdp(P, c, d, gamma, 0, d0=1e9)
        pi = TabularPolicy.uniform(n_states, n_actions)
        D = policy_evaluate(tmp, pi, which="constraint")
        d0 = float(D[0]) * 1.02 + 1e-3
    return TabularCmdp(P, c, d, gamma, 0, d0)
