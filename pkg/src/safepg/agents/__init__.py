from .buffer import ReplayBuffer
from .config import SafePgConfig
from .critics import CriticBundle, QCritic, ValueCritic
from .ddpg import DdpgAgent, DeterministicActor, a_projection_actor_grad, ddpg_update
from .lagrangian import (
    CriticState,
    LagrangeState,
    LagrangianPgAgent,
    NacState,
    lagrangian_ac_update,
    lagrangian_lambda_update,
    lagrangian_pg_update,
)
from .policies import (
    GaussianPolicyAdapter,
    SoftmaxTabularPolicyAdapter,
    exact_softmax_policy_gradient,
)
from .ppo import PpoAgent, returns_to_go
from .projection import (
    ProjectionResult,
    projection_jacobian,
    safeguard_triggered,
    safety_layer_project,
    safety_layer_project_gaussian,
    theta_projection_multiplier,
    tighten_threshold,
)

__all__ = [
    "ReplayBuffer",
    "SafePgConfig",
    "CriticBundle",
    "QCritic",
    "ValueCritic",
    "DdpgAgent",
    "DeterministicActor",
    "a_projection_actor_grad",
    "ddpg_update",
    "CriticState",
    "LagrangeState",
    "LagrangianPgAgent",
    "NacState",
    "lagrangian_ac_update",
    "lagrangian_lambda_update",
    "lagrangian_pg_update",
    "GaussianPolicyAdapter",
    "SoftmaxTabularPolicyAdapter",
    "exact_softmax_policy_gradient",
    "PpoAgent",
    "returns_to_go",
    "ProjectionResult",
    "projection_jacobian",
    "safeguard_triggered",
    "safety_layer_project",
    "safety_layer_project_gaussian",
    "theta_projection_multiplier",
    "tighten_threshold",
]
