# Lagrangian-relaxation updates: trajectory-based policy gradient and the
# incremental actor-critic form, both with the multiplier projected onto
# [0, lambda_max].
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ..diff.gaussian import GaussianPolicy
from ..diff.mlp import MlpSpec, ParamVector, mlp_backward, mlp_forward
from ..diff.trajectories import TrajectoryBatch, discounted_returns
from .config import SafePgConfig
from .policies import GaussianPolicyAdapter


@dataclass
class LagrangeState:
    lam: float = 0.0
    lambda_max: float = 100.0
    alpha_lambda: float = 0.01   # slowest schedule
    alpha_theta: float = 0.05    # intermediate schedule
    alpha_critic: float = 0.1    # fastest schedule

    def __post_init__(self):
        if not (0.0 <= self.lam <= self.lambda_max):
            raise ValueError("lambda must start inside [0, lambda_max]")

    def project(self, lam: float) -> float:
        return float(np.clip(lam, 0.0, self.lambda_max))


def lagrangian_pg_update(
    adapter,
    params: np.ndarray,
    batch: TrajectoryBatch,
    lagrange: LagrangeState,
    gamma: float,
    d0: float,
) -> tuple[np.ndarray, LagrangeState, dict]:
    """Trajectory-based primal-dual step.

    theta descends the gradient of C + lam * D estimated from N complete
    episodes; lambda moves along the projected dual ascent with the
    batch-mean constraint return. Each step's score is paired with the
    discounted cost-to-go from that step (same expectation as weighting the
    whole-trajectory score by the episode return, with far lower variance).
    """
    if len(batch) == 0:
        raise ValueError("batch must contain at least one episode")
    D = discounted_returns(batch, "constraint", gamma)
    grad = np.zeros_like(params)
    for ep in batch.episodes:
        h = ep.costs + lagrange.lam * ep.constraint_costs
        gammas = gamma ** np.arange(ep.length)
        togo = np.cumsum((gammas * h)[::-1])[::-1] / gammas
        for t, (s, a) in enumerate(zip(ep.states[:-1], ep.actions)):
            _, g = adapter.logprob_grad(params, s, a)
            grad += gammas[t] * togo[t] * g
    grad /= len(batch)
    new_params = params - lagrange.alpha_theta * grad
    new_lam = lagrange.project(
        lagrange.lam + lagrange.alpha_lambda * (-d0 + float(D.mean()))
    )
    new_state = LagrangeState(new_lam, lagrange.lambda_max,
                              lagrange.alpha_lambda, lagrange.alpha_theta,
                              lagrange.alpha_critic)
    info = {"theta_grad": grad, "mean_constraint": float(D.mean()),
            "lambda": new_lam}
    return new_params, new_state, info


@dataclass
class CriticState:
    """MLP state-value critic updated by semi-gradient TD."""

    spec: MlpSpec
    values: np.ndarray

    def value(self, obs: np.ndarray) -> float:
        out = mlp_forward(self.spec, ParamVector(self.spec, self.values), obs)
        return float(np.asarray(out).reshape(-1)[0])


@dataclass
class NacState:
    """Natural-gradient running weight vector w."""

    w: np.ndarray


def lagrangian_ac_update(
    adapter,
    params: np.ndarray,
    critic: CriticState,
    transition: tuple,
    lagrange: LagrangeState,
    gamma: float,
    terminal: bool = False,
    nac: NacState | None = None,
) -> tuple[np.ndarray, float]:
    """One incremental actor-critic step on the augmented cost c + lam*d.

    Mutates critic (and nac when given) in place; returns (new_params, delta).
    The lambda update is driven separately at episode boundaries via
    lagrangian_lambda_update.
    """
    obs, action, cost, dcost, obs_next = transition
    c_aug = cost + lagrange.lam * dcost
    v = critic.value(obs)
    v_next = 0.0 if terminal else critic.value(obs_next)
    delta = c_aug + gamma * v_next - v

    # Critic: semi-gradient TD(0) on the squared error, fastest schedule.
    pv = ParamVector(critic.spec, critic.values)
    grad_v, _ = mlp_backward(critic.spec, pv, obs, np.array([1.0]))
    critic.values += lagrange.alpha_critic * delta * grad_v

    _, score = adapter.logprob_grad(params, obs, action)
    if nac is None:
        new_params = params - lagrange.alpha_theta * score * delta / (1.0 - gamma)
    else:
        nac.w = (nac.w - lagrange.alpha_critic * score * float(score @ nac.w)
                 + lagrange.alpha_critic * delta * score)
        new_params = params - lagrange.alpha_theta * nac.w / (1.0 - gamma)
    return new_params, float(delta)


def lagrangian_lambda_update(
    lagrange: LagrangeState, constraint_returns: np.ndarray, d0: float
) -> LagrangeState:
    new_lam = lagrange.project(
        lagrange.lam
        + lagrange.alpha_lambda * (-d0 + float(np.mean(constraint_returns)))
    )
    return LagrangeState(new_lam, lagrange.lambda_max, lagrange.alpha_lambda,
                         lagrange.alpha_theta, lagrange.alpha_critic)


class LagrangianPgAgent(BaseEstimator):
    """Gaussian-policy trajectory primal-dual method (no safety projection)."""

    def __init__(self, obs_dim: int, action_dim: int, d0: float,
                 config: SafePgConfig | None = None,
                 hidden: tuple[int, ...] = (32, 32)):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.d0 = d0
        self.config = config
        self.hidden = hidden

    on_policy = True

    def setup(self, rng: np.random.Generator):
        cfg = self.config or SafePgConfig()
        self.config_ = cfg
        self.policy_ = GaussianPolicy(self.obs_dim, self.action_dim,
                                      self.hidden)
        self.adapter_ = GaussianPolicyAdapter(self.policy_)
        self.params_ = self.adapter_.init(rng)
        self.lagrange_ = LagrangeState(
            0.0, cfg.lambda_max, cfg.alpha_lambda, cfg.alpha_theta,
            cfg.alpha_critic)
        return self

    def observe_constraint(self, d_hat: float):
        pass  # the multiplier is driven by the training batch instead

    def act(self, obs: np.ndarray, rng: np.random.Generator | None = None,
            explore: bool = True):
        if not explore:
            return self.adapter_.mean_action(self.params_, obs), 0.0
        return self.adapter_.sample(self.params_, obs, rng)

    def update(self, batch: TrajectoryBatch, rng=None) -> dict:
        self.params_, self.lagrange_, info = lagrangian_pg_update(
            self.adapter_, self.params_, batch, self.lagrange_,
            self.config_.gamma, self.d0)
        return {"lam": self.lagrange_.lam, "kl": 0.0,
                "mean_constraint": info["mean_constraint"]}

    def fit(self, env, iterations: int = 10, episodes_per_iteration: int = 5,
            seed: int = 0):
        from ..harness.run import collect_batch  # local import: no cycle at module load

        rng = np.random.default_rng(seed)
        self.setup(rng)
        ep_seed = 0
        for _ in range(iterations):
            batch = collect_batch(env, self, episodes_per_iteration, ep_seed,
                                  rng)
            ep_seed += episodes_per_iteration
            self.update(batch, rng)
        return self

    def predict(self, obs_batch: np.ndarray) -> np.ndarray:
        return np.stack([self.act(o, explore=False)[0]
                         for o in np.atleast_2d(obs_batch)])
