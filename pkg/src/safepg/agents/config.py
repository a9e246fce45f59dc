# Shared hyper-parameter block for the policy-gradient algorithms.
from __future__ import annotations

from dataclasses import dataclass, field, fields


@dataclass
class SafePgConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95

    # Trust-region penalty: beta adapts against kl_target (doubled when the
    # measured KL exceeds 2x target, halved below half target).
    beta: float = 1.0
    kl_target: float = 0.01
    beta_min: float = 1e-4
    beta_max: float = 1e6

    actor_lr: float = 0.1
    critic_lr: float = 0.05
    critic_epochs: int = 40
    fisher_damping: float = 0.1

    # Off-policy pieces.
    buffer_capacity: int = 100_000
    batch_size: int = 64
    updates_per_iteration: int = 20
    target_tau: float = 0.01
    exploration_std: float = 0.3

    # Safety machinery.
    delta: float = 0.0            # threshold tightening factor
    safeguard_margin: float = 0.05
    safeguard_scale: float = 10.0  # alpha_sg = scale * actor_lr
    projection_k: float = 1.0
    std_floor: float = 1e-3

    # Lagrangian schedules.
    lambda_max: float = 100.0
    alpha_lambda: float = 0.01
    alpha_theta: float = 0.05
    alpha_critic: float = 0.1

    def __post_init__(self):
        positive = ("gamma", "beta", "kl_target", "fisher_damping",
                    "target_tau", "projection_k", "std_floor", "alpha_lambda",
                    "alpha_theta", "alpha_critic")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("actor_lr", "critic_lr", "safeguard_scale"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not (0.0 <= self.delta < 1.0):
            raise ValueError("delta must lie in [0, 1)")
        if not (0.0 <= self.gae_lambda <= 1.0):
            raise ValueError("gae_lambda must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, doc: dict) -> "SafePgConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)
