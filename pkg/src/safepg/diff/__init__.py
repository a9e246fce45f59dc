from .fisher import FisherSolve, fisher_system_solve, policy_scores, solve_from_scores
from .gaussian import (
    LOGVAR_MAX,
    LOGVAR_MIN,
    GaussianPolicy,
    gaussian_logprob,
    gaussian_logprob_batch,
    kl_diag_gaussian,
    score_vector,
)
from .mlp import (
    MlpSpec,
    ParamVector,
    ShapeError,
    init_params,
    mlp_backward,
    mlp_forward,
)
from .trajectories import (
    Episode,
    TrajectoryBatch,
    batch_gae,
    discounted_returns,
    gae_advantages,
)

__all__ = [
    "FisherSolve",
    "fisher_system_solve",
    "policy_scores",
    "solve_from_scores",
    "GaussianPolicy",
    "gaussian_logprob",
    "gaussian_logprob_batch",
    "kl_diag_gaussian",
    "score_vector",
    "LOGVAR_MAX",
    "LOGVAR_MIN",
    "MlpSpec",
    "ParamVector",
    "ShapeError",
    "init_params",
    "mlp_backward",
    "mlp_forward",
    "Episode",
    "TrajectoryBatch",
    "batch_gae",
    "discounted_returns",
    "gae_advantages",
]
