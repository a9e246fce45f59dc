# Experiment configuration: a YAML-backed document with registries for
# environments and algorithms, and named RNG substreams derived from one
# master seed so adding a consumer never perturbs the others.
from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import yaml

from ..agents.config import SafePgConfig
from ..envs import EnvConfig, PointCircleEnv, PointGatherEnv

ENVIRONMENTS = {
    "point-circle": PointCircleEnv,
    "point-gather": PointGatherEnv,
}

# algorithm id -> (family, update mode)
ALGORITHMS = {
    "ddpg": ("ddpg", "unconstrained"),
    "sddpg-theta": ("ddpg", "theta"),
    "sddpg-action": ("ddpg", "action"),
    "ppo": ("ppo", "unconstrained"),
    "sppo-theta": ("ppo", "theta"),
    "sppo-action": ("ppo", "action"),
    "lagrangian-pg": ("lagrangian", None),
}


class ConfigError(ValueError):
    pass


def substream_seed(master_seed: int, name: str) -> int:
    """Deterministic named substream of a master seed (stable across runs)."""
    digest = hashlib.blake2b(f"{master_seed}:{name}".encode(),
                             digest_size=8).digest()
    return int.from_bytes(digest, "big") % (2 ** 63)


@dataclass
class ExperimentConfig:
    environment: str = "point-gather"
    algorithm: str = "ppo"
    iterations: int = 100
    episodes_per_iteration: int = 10
    eval_episodes: int = 10
    seed: int = 0
    out_dir: str = "runs"
    hidden: tuple[int, ...] = (32, 32)
    constrained: bool = True      # apply the environment's d0; off = d0 -> inf
    env_config: EnvConfig | None = None  # None: the environment's own defaults
    algo_config: SafePgConfig = field(default_factory=SafePgConfig)

    def __post_init__(self):
        if self.environment not in ENVIRONMENTS:
            raise ConfigError(f"unknown environment {self.environment!r}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        for name in ("episodes_per_iteration", "eval_episodes"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        self.hidden = tuple(self.hidden)

    def to_dict(self) -> dict:
        doc = {
            "environment": self.environment,
            "algorithm": self.algorithm,
            "iterations": self.iterations,
            "episodes_per_iteration": self.episodes_per_iteration,
            "eval_episodes": self.eval_episodes,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "hidden": list(self.hidden),
            "constrained": self.constrained,
            "env_config": (None if self.env_config is None
                           else asdict(self.env_config)),
            "algo_config": self.algo_config.to_dict(),
        }
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        if doc.get("env_config") is not None:
            doc["env_config"] = EnvConfig(**doc["env_config"])
        if "algo_config" in doc:
            doc["algo_config"] = SafePgConfig.from_dict(doc["algo_config"])
        known = {"environment", "algorithm", "iterations",
                 "episodes_per_iteration", "eval_episodes", "seed", "out_dir",
                 "hidden", "constrained", "env_config", "algo_config"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def to_yaml(self, path: str | Path):
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=True))

    @classmethod
    def from_yaml(cls, path: str | Path) -> "ExperimentConfig":
        doc = yaml.safe_load(Path(path).read_text())
        if not isinstance(doc, dict):
            raise ConfigError("config file must contain a mapping")
        return cls.from_dict(doc)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)
