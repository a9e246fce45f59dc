# Occupancy-measure LP oracle for tabular CMDPs.
#
# Normalization convention: the LP works with the normalized occupancy
# rho(x,a) = (1-gamma) E[sum_t gamma^t 1{x_t=x, a_t=a}], which sums to 1;
# discounted values are rescaled by 1/(1-gamma) on the way out.
from __future__ import annotations

import numpy as np
from scipy.optimize import linprog

from .types import Infeasible, TabularCmdp, TabularPolicy

UNCONSTRAINED = np.inf  # sentinel d0 disabling the constraint row


def lp_optimal_cmdp(
    cmdp: TabularCmdp, d0: float | None = None
) -> tuple[float, TabularPolicy]:
    """Solve the CMDP exactly; returns (optimal discounted cost at x0, policy).

    Pass d0=np.inf to drop the constraint (unconstrained MDP optimum).
    """
    S, A = cmdp.n_states, cmdp.n_actions
    if d0 is None:
        d0 = cmdp.d0
    n = S * A
    c_vec = cmdp.cost.ravel()

    # Flow conservation: sum_a rho(x,a) - gamma sum_{x',a'} P(x|x',a') rho(x',a')
    #                    = (1-gamma) 1{x=x0}
    A_eq = np.zeros((S, n))
    for x in range(S):
        A_eq[x, x * A : (x + 1) * A] += 1.0
    A_eq -= cmdp.gamma * cmdp.transition.reshape(n, S).T
    b_eq = np.zeros(S)
    b_eq[cmdp.x0] = 1.0 - cmdp.gamma

    A_ub, b_ub = None, None
    if np.isfinite(d0):
        d_row = np.repeat(cmdp.constraint_cost, A)
        A_ub = d_row[None, :]
        b_ub = np.array([(1.0 - cmdp.gamma) * d0])

    res = linprog(c_vec, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=(0, None), method="highs")
    if not res.success:
        raise Infeasible(f"occupancy LP failed: {res.message}")

    rho = res.x.reshape(S, A)
    state_mass = rho.sum(axis=1)
    probs = np.full((S, A), 1.0 / A)
    reached = state_mass > 1e-12
    probs[reached] = rho[reached] / state_mass[reached, None]
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum(axis=1, keepdims=True)
    value = float(res.fun) / (1.0 - cmdp.gamma)
    return value, TabularPolicy(probs)
