from .config import (
    ALGORITHMS,
    ENVIRONMENTS,
    ConfigError,
    ExperimentConfig,
    substream_seed,
)
from .run import (
    MetricsRow,
    build_agent,
    build_env,
    collect_batch,
    collect_episode,
    evaluate_policy,
    load_checkpoint,
    read_metrics,
    run_experiment,
    save_checkpoint,
)

__all__ = [
    "ALGORITHMS",
    "ENVIRONMENTS",
    "ConfigError",
    "ExperimentConfig",
    "substream_seed",
    "MetricsRow",
    "build_agent",
    "build_env",
    "collect_batch",
    "collect_episode",
    "evaluate_policy",
    "load_checkpoint",
    "read_metrics",
    "run_experiment",
    "save_checkpoint",
]
