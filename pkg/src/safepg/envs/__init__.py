from .gridworld import GridworldEnv
from .point import EnvConfig, EpisodeOver, PointCircleEnv, PointGatherEnv, StepResult

__all__ = [
    "GridworldEnv",
    "EnvConfig",
    "EpisodeOver",
    "PointCircleEnv",
    "PointGatherEnv",
    "StepResult",
]
