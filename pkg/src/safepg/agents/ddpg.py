# Deterministic policy-gradient family: the unconstrained baseline, the
# parameter-projection variant, and the action-projection (safety layer)
# variant. All three train both critics with identical arithmetic so that a
# task with zero constraint cost produces bitwise-equal parameter
# trajectories across variants.
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ..diff.mlp import MlpSpec, ParamVector, init_params, mlp_backward, mlp_forward
from .buffer import ReplayBuffer
from .config import SafePgConfig
from .critics import CriticBundle, QCritic
from .projection import (
    ProjectionResult,
    projection_jacobian,
    safeguard_triggered,
    safety_layer_project,
    theta_projection_multiplier,
    tighten_threshold,
)

MODES = ("unconstrained", "theta", "action")


class DeterministicActor:
    """MLP mapping observations to tanh-squashed actions in (-1, 1)."""

    def __init__(self, obs_dim: int, action_dim: int,
                 hidden: tuple[int, ...] = (32, 32)):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.spec = MlpSpec(obs_dim, hidden, action_dim, "tanh")

    def init(self, rng: np.random.Generator) -> ParamVector:
        return init_params(self.spec, rng)

    def action(self, params: ParamVector, obs: np.ndarray) -> np.ndarray:
        return np.tanh(mlp_forward(self.spec, params, obs))

    def backward(self, params: ParamVector, obs: np.ndarray,
                 action_cotangent: np.ndarray) -> np.ndarray:
        """Parameter gradient given d(objective)/d(action) per sample."""
        u = mlp_forward(self.spec, params, np.atleast_2d(obs))
        cot = np.atleast_2d(action_cotangent) * (1.0 - np.tanh(u) ** 2)
        grad, _ = mlp_backward(self.spec, params, np.atleast_2d(obs), cot)
        return grad


def a_projection_actor_grad(
    actor: DeterministicActor,
    actor_params: ParamVector,
    qv: QCritic,
    qw: QCritic,
    obs: np.ndarray,
    baseline_action: np.ndarray,
    epsilon_tilde: float,
) -> tuple[np.ndarray, ProjectionResult]:
    """Gradient of Q_V(x, project(pi(x))) with respect to actor parameters.

    The safety layer's output Jacobian (identity minus the rank-one projector
    when the constraint is active) is composed with the actor Jacobian; the
    constraint gradient g_L is treated as constant.
    """
    a_unc = actor.action(actor_params, obs)
    g_L = qw.action_grad(obs, baseline_action)
    res = safety_layer_project(a_unc, baseline_action, g_L, epsilon_tilde)
    dq_da = qv.action_grad(obs, res.action)
    if res.active:
        dq_da = projection_jacobian(g_L, True) @ dq_da
    return actor.backward(actor_params, obs, dq_da), res


def ddpg_update(
    actor: DeterministicActor,
    actor_params: ParamVector,
    target_actor_params: ParamVector,
    bundle: CriticBundle,
    batch: dict,
    config: SafePgConfig,
    mode: str = "unconstrained",
    epsilon_tilde: float = 0.0,
    safeguard: bool = False,
) -> dict:
    """One off-policy update: critic regression plus one actor step.

    Mutates actor_params, target_actor_params, and the critics in place and
    returns diagnostics.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    n = len(batch["costs"])
    if n == 0:
        raise ValueError("empty batch")
    obs, actions = batch["obs"], batch["actions"]
    next_obs = batch["next_obs"]
    not_done = 1.0 - batch["done"].astype(float)

    # Critic regression toward one-step bootstrapped targets. Both critics
    # are always trained, whichever variant is running.
    a_next = actor.action(target_actor_params, next_obs)
    y_v = batch["costs"] + config.gamma * not_done * bundle.qv.value(
        next_obs, a_next, use_target=True)
    y_w = batch["constraint_costs"] + config.gamma * not_done * bundle.qw.value(
        next_obs, a_next, use_target=True)
    bundle.qv.train_step(obs, actions, y_v, config.critic_lr)
    bundle.qw.train_step(obs, actions, y_w, config.critic_lr)

    info = {"lam": 0.0, "degenerate": False}
    ones = np.ones((n, 1)) / n
    if mode == "action":
        cots = np.empty((n, actor.action_dim))
        a_unc = actor.action(actor_params, obs)
        a_base = actor.action(target_actor_params, obs)
        if safeguard:
            # Pure descent on the constraint critic, at the boosted rate.
            for i in range(n):
                cots[i] = bundle.qw.action_grad(obs[i], a_unc[i]) / n
            info["safeguard"] = True
        else:
            for i in range(n):
                g_L = bundle.qw.action_grad(obs[i], a_base[i])
                res = safety_layer_project(a_unc[i], a_base[i], g_L,
                                           epsilon_tilde)
                dq_da = bundle.qv.action_grad(obs[i], res.action)
                if res.active:
                    dq_da = projection_jacobian(g_L, True) @ dq_da
                cots[i] = dq_da / n
        direction = actor.backward(actor_params, obs, cots)
    else:
        a_pi = actor.action(actor_params, obs)
        _, gin_v = mlp_backward(bundle.qv.spec, bundle.qv.params,
                                bundle.qv._cat(obs, a_pi), ones)
        grad_c = actor.backward(actor_params, obs, gin_v[:, actor.obs_dim:])
        direction = grad_c
        if mode == "theta" or safeguard:
            _, gin_w = mlp_backward(bundle.qw.spec, bundle.qw.params,
                                    bundle.qw._cat(obs, a_pi), ones)
            grad_d = actor.backward(actor_params, obs, gin_w[:, actor.obs_dim:])
            if safeguard:
                direction = grad_d
                info["safeguard"] = True
            else:
                # The deterministic policy has no KL curvature; the projection
                # multiplier uses an identity metric.
                lam, degen = theta_projection_multiplier(
                    grad_c, grad_d, lambda v: v, epsilon_tilde, config.beta)
                info["lam"], info["degenerate"] = lam, degen
                if lam > 0.0:
                    direction = grad_c + lam * grad_d

    lr = config.actor_lr * (config.safeguard_scale if safeguard else 1.0)
    actor_params.values -= lr * direction

    bundle.qv.soft_update(config.target_tau)
    bundle.qw.soft_update(config.target_tau)
    target_actor_params.values += config.target_tau * (
        actor_params.values - target_actor_params.values)
    info["actor_step_norm"] = float(np.linalg.norm(lr * direction))
    return info


class DdpgAgent(BaseEstimator):
    """Off-policy deterministic policy gradient with optional safety variants.

    mode selects the update rule: "unconstrained" trains on cost alone,
    "theta" projects the parameter step onto the linearized constraint
    halfspace, "action" routes every action through the safety layer.
    """

    def __init__(self, obs_dim: int, action_dim: int, d0: float = np.inf,
                 config: SafePgConfig | None = None,
                 mode: str = "unconstrained",
                 hidden: tuple[int, ...] = (32, 32)):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.d0 = d0
        self.config = config
        self.mode = mode
        self.hidden = hidden

    on_policy = False

    def setup(self, rng: np.random.Generator):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        cfg = self.config or SafePgConfig()
        self.config_ = cfg
        self.actor_ = DeterministicActor(self.obs_dim, self.action_dim,
                                         self.hidden)
        self.params_ = self.actor_.init(rng)
        self.target_params_ = self.params_.copy()
        self.bundle_ = CriticBundle(
            qv=QCritic(self.obs_dim, self.action_dim, self.hidden),
            qw=QCritic(self.obs_dim, self.action_dim, self.hidden,
                       zero_output=True),
        )
        self.bundle_.setup(rng)
        self.buffer_ = ReplayBuffer(cfg.buffer_capacity, self.obs_dim,
                                    self.action_dim)
        self.d_hat_ = 0.0
        self.safeguard_ = False
        self._refresh_budget()
        return self

    def _refresh_budget(self):
        d0_eff = tighten_threshold(self.d0, self.config_.delta) \
            if np.isfinite(self.d0) else np.inf
        slack = max(d0_eff - self.d_hat_, 0.0)
        self.epsilon_tilde_ = ((1.0 - self.config_.gamma) * slack
                               if np.isfinite(slack) else np.inf)

    def observe_constraint(self, d_hat: float):
        """Feed back the latest evaluation-time constraint return."""
        self.d_hat_ = float(d_hat)
        self.safeguard_ = np.isfinite(self.d0) and safeguard_triggered(
            self.d_hat_, self.d0, self.config_.safeguard_margin)
        self._refresh_budget()

    def act(self, obs: np.ndarray, rng: np.random.Generator | None = None,
            explore: bool = False) -> np.ndarray:
        a = self.actor_.action(self.params_, obs)
        if self.mode == "action" and np.isfinite(self.epsilon_tilde_):
            a_base = self.actor_.action(self.target_params_, obs)
            g_L = self.bundle_.qw.action_grad(obs, a_base)
            a = safety_layer_project(a, a_base, g_L, self.epsilon_tilde_).action
        if explore:
            a = a + self.config_.exploration_std * rng.standard_normal(
                self.action_dim)
        return np.clip(a, -1.0, 1.0)

    def record(self, obs, action, cost, constraint_cost, next_obs, done):
        self.buffer_.append(obs, action, cost, constraint_cost, next_obs, done)

    def update(self, rng: np.random.Generator) -> dict:
        cfg = self.config_
        info = {}
        for _ in range(cfg.updates_per_iteration):
            if len(self.buffer_) < cfg.batch_size:
                break
            batch = self.buffer_.sample(cfg.batch_size, rng)
            eps = self.epsilon_tilde_ if np.isfinite(self.epsilon_tilde_) else 0.0
            info = ddpg_update(self.actor_, self.params_, self.target_params_,
                               self.bundle_, batch, cfg, mode=self.mode,
                               epsilon_tilde=eps,
                               safeguard=self.safeguard_ and self.mode != "unconstrained")
        return info

    def fit(self, env, iterations: int = 10, episodes_per_iteration: int = 5,
            seed: int = 0):
        from ..harness.run import collect_episode  # local import: no cycle at module load

        rng = np.random.default_rng(seed)
        self.setup(rng)
        ep_seed = 0
        for _ in range(iterations):
            returns = []
            for _ in range(episodes_per_iteration):
                ep = collect_episode(env, self, ep_seed, rng, explore=True,
                                     record=True)
                returns.append(float(np.polynomial.polynomial.polyval(
                    self.config_.gamma, ep.constraint_costs)))
                ep_seed += 1
            self.observe_constraint(float(np.mean(returns)))
            self.update(rng)
        return self

    def predict(self, obs_batch: np.ndarray) -> np.ndarray:
        return np.stack([self.act(o) for o in np.atleast_2d(obs_batch)])
