# On-policy natural-gradient family: the KL-penalized baseline, the
# parameter-projection variant, and the action-projection (safety layer)
# variant over a diagonal-Gaussian policy. The constraint-side networks start
# at exactly zero, so a task with zero constraint cost yields bitwise-equal
# parameter trajectories across the three variants.
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ..diff.fisher import solve_from_scores
from ..diff.gaussian import (
    LOG_2PI,
    LOGVAR_MAX,
    LOGVAR_MIN,
    GaussianPolicy,
    gaussian_logprob,
    kl_diag_gaussian,
)
from ..diff.mlp import mlp_backward, mlp_forward
from ..diff.trajectories import TrajectoryBatch, batch_gae
from .config import SafePgConfig
from .critics import CriticBundle, QCritic, ValueCritic
from .projection import (
    projection_jacobian,
    safeguard_triggered,
    safety_layer_project_gaussian,
    theta_projection_multiplier,
    tighten_threshold,
)

MODES = ("unconstrained", "theta", "action")


def returns_to_go(costs: np.ndarray, gamma: float) -> np.ndarray:
    out = np.empty(len(costs))
    acc = 0.0
    for t in range(len(costs) - 1, -1, -1):
        acc = costs[t] + gamma * acc
        out[t] = acc
    return out


class PpoAgent(BaseEstimator):
    """Natural-gradient policy optimization with an adaptive KL penalty.

    mode selects the update rule: "unconstrained" follows the cost gradient
    alone, "theta" projects the natural-gradient step onto the linearized
    constraint halfspace, "action" samples through the Lyapunov safety layer
    and differentiates through its projection.
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

    on_policy = True

    def setup(self, rng: np.random.Generator):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        cfg = self.config or SafePgConfig()
        self.config_ = cfg
        self.policy_ = GaussianPolicy(self.obs_dim, self.action_dim,
                                      self.hidden)
        self.params_ = self.policy_.init(rng)
        self.baseline_params_ = self.params_.copy()
        self.bundle_ = CriticBundle(
            qw=QCritic(self.obs_dim, self.action_dim, self.hidden,
                       zero_output=True),
            v=ValueCritic(self.obs_dim, self.hidden),
            w=ValueCritic(self.obs_dim, self.hidden, zero_output=True),
        )
        self.bundle_.setup(rng)
        self.beta_ = cfg.beta
        self.d_hat_ = 0.0
        self.safeguard_ = False
        self._refresh_budget()
        return self

    def _refresh_budget(self):
        if np.isfinite(self.d0):
            d0_eff = tighten_threshold(self.d0, self.config_.delta)
            self.budget_ = max(d0_eff - self.d_hat_, 0.0)
            self.eps_action_ = (1.0 - self.config_.gamma) * self.budget_
        else:
            self.budget_ = np.inf
            self.eps_action_ = np.inf

    def observe_constraint(self, d_hat: float):
        """Feed back the latest evaluation-time constraint return."""
        self.d_hat_ = float(d_hat)
        self.safeguard_ = np.isfinite(self.d0) and safeguard_triggered(
            self.d_hat_, self.d0, self.config_.safeguard_margin)
        self._refresh_budget()

    # -- action path -------------------------------------------------------

    def _project_dist(self, obs: np.ndarray, mean: np.ndarray,
                      std: np.ndarray):
        a_base = self.policy_.mean_std(self.baseline_params_, obs)[0]
        g_L = self.bundle_.qw.action_grad(obs, a_base)
        eps = self.eps_action_ if np.isfinite(self.eps_action_) else 0.0
        res = safety_layer_project_gaussian(
            mean, std, a_base, g_L, eps,
            k=self.config_.projection_k, std_floor=self.config_.std_floor)
        return res, g_L

    def dist_at(self, obs: np.ndarray):
        """Acting distribution (mean, std) at one observation."""
        mean, std = self.policy_.mean_std(self.params_, obs)
        if self.mode == "action" and np.isfinite(self.eps_action_):
            res, _ = self._project_dist(obs, mean, std)
            return res.action, res.std
        return mean, std

    def act(self, obs: np.ndarray, rng: np.random.Generator | None = None,
            explore: bool = True):
        mean, std = self.dist_at(obs)
        if not explore:
            return mean, 0.0
        action = mean + std * rng.standard_normal(self.action_dim)
        diff = (action - mean) / std
        logp = float(-0.5 * np.sum(diff * diff + LOG_2PI)
                     - np.sum(np.log(std)))
        return action, logp

    def _score(self, obs: np.ndarray, action: np.ndarray) -> np.ndarray:
        """grad_theta log pi(action|obs) through the acting distribution."""
        if self.mode != "action" or not np.isfinite(self.eps_action_):
            return gaussian_logprob(self.policy_, self.params_, obs, action)[1]
        spec = self.policy_.spec
        out = mlp_forward(spec, self.params_, obs)
        mean = out[: self.action_dim]
        raw_logvar = out[self.action_dim:]
        clamped = (raw_logvar <= LOGVAR_MIN) | (raw_logvar >= LOGVAR_MAX)
        std = np.exp(0.5 * np.clip(raw_logvar, LOGVAR_MIN, LOGVAR_MAX))
        res, g_L = self._project_dist(obs, mean, std)
        if not res.active and not res.std_floor_hit:
            return gaussian_logprob(self.policy_, self.params_, obs, action)[1]
        mean_p, std_p = res.action, res.std
        diff = action - mean_p
        inv_var = 1.0 / (std_p * std_p)
        g_mean_p = diff * inv_var
        g_logvar_p = 0.5 * (diff * diff * inv_var - 1.0)
        # Pull the mean cotangent back through the projection; the stddev
        # scaling is treated as locally constant, and floor-clamped components
        # pass no gradient.
        cot_mean = projection_jacobian(g_L, res.active) @ g_mean_p
        cot_logvar = np.where(std_p <= self.config_.std_floor, 0.0, g_logvar_p)
        cot_logvar = np.where(clamped, 0.0, cot_logvar)
        gy = np.concatenate([cot_mean, cot_logvar])
        grad, _ = mlp_backward(spec, self.params_, obs, gy)
        return grad

    # -- update ------------------------------------------------------------

    def update(self, batch: TrajectoryBatch, rng=None) -> dict:
        if len(batch) == 0:
            raise ValueError("batch must contain at least one episode")
        cfg = self.config_
        obs_all = batch.all_states()
        act_all = batch.all_actions()
        n_steps = batch.n_steps

        ctg = np.concatenate(
            [returns_to_go(ep.costs, cfg.gamma) for ep in batch.episodes])
        dtg = np.concatenate(
            [returns_to_go(ep.constraint_costs, cfg.gamma)
             for ep in batch.episodes])
        self.bundle_.v.fit_targets(obs_all, ctg, cfg.critic_lr,
                                   cfg.critic_epochs)
        self.bundle_.w.fit_targets(obs_all, dtg, cfg.critic_lr,
                                   cfg.critic_epochs)
        for _ in range(cfg.critic_epochs):
            self.bundle_.qw.train_step(obs_all, act_all, dtg, cfg.critic_lr)

        adv_c = np.concatenate(
            batch_gae(batch, self.bundle_.v.value, cfg.gamma, cfg.gae_lambda,
                      "cost"))
        adv_c = (adv_c - adv_c.mean()) / (adv_c.std() + 1e-8)
        adv_d = np.concatenate(
            batch_gae(batch, self.bundle_.w.value, cfg.gamma, cfg.gae_lambda,
                      "constraint"))
        gamma_pow = np.concatenate(
            [cfg.gamma ** np.arange(ep.length) for ep in batch.episodes])

        scores = np.stack([self._score(s, a)
                           for s, a in zip(obs_all, act_all)])
        g_c = scores.T @ adv_c / n_steps
        g_d = scores.T @ (gamma_pow * adv_d) / len(batch)

        def h_solve(v: np.ndarray) -> np.ndarray:
            return solve_from_scores(scores, v, cfg.fisher_damping).solution

        info = {"lam": 0.0, "degenerate": False, "safeguard": False}
        if self.safeguard_ and self.mode != "unconstrained":
            step = -(cfg.safeguard_scale / self.beta_) * h_solve(g_d)
            info["safeguard"] = True
        else:
            lam = 0.0
            if self.mode == "theta" and np.isfinite(self.budget_):
                lam, degen = theta_projection_multiplier(
                    g_c, g_d, h_solve, self.budget_, self.beta_)
                info["lam"], info["degenerate"] = lam, degen
            g = g_c + lam * g_d if lam > 0.0 else g_c
            step = -(1.0 / self.beta_) * h_solve(g)

        old = self.params_.copy()
        self.params_.values += step

        m_old, s_old = self.policy_.mean_std(old, obs_all)
        m_new, s_new = self.policy_.mean_std(self.params_, obs_all)
        kl = float(np.mean([kl_diag_gaussian(m_old[i], s_old[i],
                                             m_new[i], s_new[i])
                            for i in range(len(m_old))]))
        info["kl"], info["beta"] = kl, self.beta_
        if kl > 2.0 * cfg.kl_target:
            self.beta_ = min(self.beta_ * 2.0, cfg.beta_max)
        elif kl < 0.5 * cfg.kl_target:
            self.beta_ = max(self.beta_ * 0.5, cfg.beta_min)

        # The safety layer's reference policy is the previous iterate.
        self.baseline_params_ = old
        info["step_norm"] = float(np.linalg.norm(step))
        info["mean_constraint"] = float(np.mean(
            [returns_to_go(ep.constraint_costs, cfg.gamma)[0]
             for ep in batch.episodes]))
        return info

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
            info = self.update(batch, rng)
            self.observe_constraint(info["mean_constraint"])
        return self

    def predict(self, obs_batch: np.ndarray) -> np.ndarray:
        return np.stack([self.act(o, explore=False)[0]
                         for o in np.atleast_2d(obs_batch)])
