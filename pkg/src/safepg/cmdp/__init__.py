from .bellman import (
    bellman_apply,
    discounted_visitation,
    policy_evaluate,
    policy_evaluate_matrix,
    q_from_value,
    state_occupancy,
)
from .lp import UNCONSTRAINED, lp_optimal_cmdp
from .lyapunov import (
    constraint_slack,
    epsilon_constant,
    epsilon_star_bound,
    epsilon_state_dependent,
    lyapunov_bundle,
)
from .spi import SafePolicyIteration, spi_run, spi_step
from .types import (
    CmdpError,
    DimensionMismatch,
    Infeasible,
    InfeasibleBaseline,
    LyapunovBundle,
    TabularCmdp,
    TabularPolicy,
    random_cmdp,
)

__all__ = [
    "bellman_apply",
    "discounted_visitation",
    "policy_evaluate",
    "policy_evaluate_matrix",
    "q_from_value",
    "state_occupancy",
    "lp_optimal_cmdp",
    "UNCONSTRAINED",
    "constraint_slack",
    "epsilon_constant",
    "epsilon_star_bound",
    "epsilon_state_dependent",
    "lyapunov_bundle",
    "SafePolicyIteration",
    "spi_run",
    "spi_step",
    "CmdpError",
    "DimensionMismatch",
    "Infeasible",
    "InfeasibleBaseline",
    "LyapunovBundle",
    "TabularCmdp",
    "TabularPolicy",
    "random_cmdp",
]
