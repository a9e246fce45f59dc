import numpy as np
import pytest
from scipy.optimize import minimize

from safepg.agents import (
    CriticState,
    DdpgAgent,
    DeterministicActor,
    GaussianPolicyAdapter,
    LagrangeState,
    NacState,
    PpoAgent,
    QCritic,
    SafePgConfig,
    SoftmaxTabularPolicyAdapter,
    a_projection_actor_grad,
    ddpg_update,
    exact_softmax_policy_gradient,
    lagrangian_ac_update,
    lagrangian_lambda_update,
    lagrangian_pg_update,
    projection_jacobian,
    safeguard_triggered,
    safety_layer_project,
    safety_layer_project_gaussian,
    theta_projection_multiplier,
    tighten_threshold,
)
from safepg.agents.critics import CriticBundle
from safepg.cmdp import TabularCmdp, TabularPolicy, policy_evaluate, random_cmdp
from safepg.diff.mlp import MlpSpec, ParamVector
from safepg.diff.trajectories import Episode, TrajectoryBatch
from safepg.envs import GridworldEnv


class TestSafetyLayer:
    def test_worked_example(self):
        res = safety_layer_project(np.array([2.0, 0.0]), np.zeros(2),
                                   np.array([1.0, 0.0]), 1.0)
        assert res.lam == pytest.approx(1.0)
        np.testing.assert_allclose(res.action, [1.0, 0.0])
        assert res.active

    def test_feasible_point_unchanged(self):
        a = np.array([0.2, -0.1])
        res = safety_layer_project(a, np.zeros(2), np.array([1.0, 0.0]), 1.0)
        assert res.lam == 0.0 and not res.active
        np.testing.assert_array_equal(res.action, a)

    def test_baseline_with_zero_slack_unchanged(self):
        b = np.array([0.5, 0.5])
        res = safety_layer_project(b.copy(), b, np.array([1.0, 2.0]), 0.0)
        assert res.lam == 0.0
        np.testing.assert_array_equal(res.action, b)

    def test_degenerate_gradient_passthrough(self):
        a = np.array([3.0, -3.0])
        res = safety_layer_project(a, np.zeros(2), np.zeros(2), 0.1)
        assert res.degenerate
        np.testing.assert_array_equal(res.action, a)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            safety_layer_project(np.array([np.nan, 0.0]), np.zeros(2),
                                 np.ones(2), 1.0)

    def test_feasibility_and_idempotence(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            dim = int(rng.integers(1, 5))
            g = rng.standard_normal(dim)
            a, b = rng.standard_normal(dim), rng.standard_normal(dim)
            eps = float(rng.uniform(0, 0.5))
            res = safety_layer_project(a, b, g, eps)
            assert float(g @ (res.action - b)) <= eps + 1e-9
            again = safety_layer_project(res.action, b, g, eps)
            # Re-projection may see the boundary at float roundoff scale.
            assert again.lam <= 1e-9
            np.testing.assert_allclose(again.action, res.action, atol=1e-9)

    def test_matches_constrained_minimization_oracle(self):
        # Independent oracle: numerically minimize ||x - a||^2 subject to
        # the linearized constraint.
        rng = np.random.default_rng(1)
        for _ in range(25):
            dim = 3
            g = rng.standard_normal(dim)
            a, b = rng.standard_normal(dim), rng.standard_normal(dim)
            eps = float(rng.uniform(0, 0.3))
            res = safety_layer_project(a, b, g, eps)
            sol = minimize(lambda x: 0.5 * np.sum((x - a) ** 2), a,
                           constraints=[{"type": "ineq",
                                         "fun": lambda x: eps - g @ (x - b)}],
                           method="SLSQP",
                           options={"ftol": 1e-14, "maxiter": 200})
            np.testing.assert_allclose(res.action, sol.x, atol=1e-6)


class TestGaussianSafetyLayer:
    def test_large_margin_unchanged(self):
        mean, std = np.array([0.1, 0.0]), np.array([0.2, 0.2])
        res = safety_layer_project_gaussian(mean, std, np.zeros(2),
                                            np.array([0.1, 0.0]), 10.0)
        np.testing.assert_array_equal(res.action, mean)
        np.testing.assert_array_equal(res.std, std)
        assert not res.std_floor_hit

    def test_axis_aligned_shrink(self):
        # Violating mean along axis 0: that stddev component shrinks while
        # the orthogonal one is untouched.
        mean, std = np.array([2.0, 0.5]), np.array([0.5, 0.5])
        res = safety_layer_project_gaussian(mean, std, np.zeros(2),
                                            np.array([1.0, 0.0]), 0.2)
        assert res.active
        assert res.std[0] < 0.5
        assert res.std[1] == 0.5

    def test_floor_binding_flag(self):
        mean, std = np.array([5.0]), np.array([1.0])
        res = safety_layer_project_gaussian(mean, std, np.zeros(1),
                                            np.array([1.0]), 0.0,
                                            std_floor=1e-2)
        assert res.std_floor_hit
        assert res.std[0] == pytest.approx(1e-2)

    def test_requires_positive_std(self):
        with pytest.raises(ValueError):
            safety_layer_project_gaussian(np.zeros(2), np.zeros(2),
                                          np.zeros(2), np.ones(2), 1.0)


class TestProjectionJacobian:
    def test_inactive_is_identity(self):
        np.testing.assert_array_equal(projection_jacobian(np.ones(3), False),
                                      np.eye(3))

    def test_active_zeroes_gradient_component(self):
        J = projection_jacobian(np.array([1.0, 0.0]), True)
        np.testing.assert_allclose(J @ np.array([3.0, 2.0]), [0.0, 2.0])

    def test_matches_finite_differences_of_projection(self):
        rng = np.random.default_rng(2)
        g = rng.standard_normal(3)
        b = rng.standard_normal(3)
        a = b + g  # strictly violating for small epsilon
        eps = 0.1
        res = safety_layer_project(a, b, g, eps)
        assert res.active
        J = projection_jacobian(g, True)
        h = 1e-6
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            up = safety_layer_project(a + e, b, g, eps).action
            dn = safety_layer_project(a - e, b, g, eps).action
            np.testing.assert_allclose((up - dn) / (2 * h), J[:, k],
                                       atol=1e-6)


class TestThetaProjectionMultiplier:
    def test_zero_constraint_gradient_degenerate(self):
        lam, degen = theta_projection_multiplier(np.ones(3), np.zeros(3),
                                                 lambda v: v, 0.5, 1.0)
        assert lam == 0.0 and degen

    def test_orthogonal_zero_budget(self):
        lam, degen = theta_projection_multiplier(
            np.array([1.0, 0.0]), np.array([0.0, 1.0]), lambda v: v, 0.0, 1.0)
        assert lam == 0.0 and not degen

    def test_matches_kkt_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            dim = int(rng.integers(2, 6))
            A = rng.standard_normal((dim, dim))
            H = A.T @ A + 0.2 * np.eye(dim)
            g_c, g_d = rng.standard_normal(dim), rng.standard_normal(dim)
            eps, beta = float(rng.uniform(0, 0.5)), float(rng.uniform(0.5, 4))
            lam, _ = theta_projection_multiplier(
                g_c, g_d, lambda v: np.linalg.solve(H, v), eps, beta)
            delta = -np.linalg.solve(H, g_c) / beta
            if g_d @ delta <= eps + 1e-12:
                oracle = 0.0
            else:
                kkt = np.zeros((dim + 1, dim + 1))
                kkt[:dim, :dim] = beta * H
                kkt[:dim, dim] = g_d
                kkt[dim, :dim] = g_d
                oracle = max(float(np.linalg.solve(
                    kkt, np.concatenate([-g_c, [eps]]))[dim]), 0.0)
            assert lam == pytest.approx(oracle, abs=1e-8)


class TestSafeguardRules:
    def test_trigger_predicate(self):
        assert not safeguard_triggered(2.0, 2.0)
        assert not safeguard_triggered(2.09, 2.0, margin=0.05)
        assert safeguard_triggered(2.11, 2.0, margin=0.05)

    def test_tighten_threshold_values(self):
        assert tighten_threshold(5.0, 0.0) == 5.0
        assert tighten_threshold(100.0, 0.1) == pytest.approx(90.0)

    def test_tighten_monotone_in_budget(self):
        # A tightened threshold never yields a larger slack budget.
        for d_hat in (0.0, 1.0, 1.9):
            raw = max(tighten_threshold(2.0, 0.0) - d_hat, 0.0)
            tight = max(tighten_threshold(2.0, 0.2) - d_hat, 0.0)
            assert tight <= raw

    def test_delta_out_of_range(self):
        with pytest.raises(ValueError):
            tighten_threshold(1.0, 1.0)


class TestSoftmaxAdapter:
    def test_probs_are_distributions(self):
        adapter = SoftmaxTabularPolicyAdapter(4, 3)
        p = adapter.probs(np.random.default_rng(0).standard_normal(12))
        np.testing.assert_allclose(p.sum(axis=1), 1.0)
        assert np.all(p > 0)

    def test_logprob_grad_matches_finite_differences(self):
        adapter = SoftmaxTabularPolicyAdapter(3, 3)
        rng = np.random.default_rng(1)
        params = rng.standard_normal(9)
        obs = np.eye(3)[1]
        _, grad = adapter.logprob_grad(params, obs, 2)
        h = 1e-6
        for k in range(9):
            e = np.zeros(9)
            e[k] = h
            up = adapter.logprob_grad(params + e, obs, 2)[0]
            dn = adapter.logprob_grad(params - e, obs, 2)[0]
            assert (up - dn) / (2 * h) == pytest.approx(grad[k], abs=1e-6)

    def test_exact_gradient_matches_value_finite_differences(self):
        # Oracle: central differences of the exact discounted cost through
        # closed-form policy evaluation.
        rng = np.random.default_rng(4)
        cmdp = random_cmdp(4, 2, 0.85, rng)
        adapter = SoftmaxTabularPolicyAdapter(4, 2)
        params = 0.4 * rng.standard_normal(8)
        lam = 0.7

        def value(p):
            pi = TabularPolicy(adapter.probs(p))
            c = policy_evaluate(cmdp, pi, which="cost")[cmdp.x0]
            d = policy_evaluate(cmdp, pi, which="constraint")[cmdp.x0]
            return c + lam * d

        grad = exact_softmax_policy_gradient(cmdp, params, "cost", lam=lam)
        h = 1e-6
        for k in range(8):
            e = np.zeros(8)
            e[k] = h
            fd = (value(params + e) - value(params - e)) / (2 * h)
            assert fd == pytest.approx(grad[k], abs=1e-6)


def _gridworld_batch(cmdp, adapter, params, n_episodes, horizon, rng):
    env = GridworldEnv(cmdp, episode_len=horizon)
    probs = adapter.probs(params)
    episodes = []
    for ep in range(n_episodes):
        obs = env.reset(ep)
        states, acts, costs, dcosts, logps = [obs], [], [], [], []
        done = False
        while not done:
            x = env.state
            a = int(rng.choice(cmdp.n_actions, p=probs[x]))
            res = env.step(a)
            states.append(res.obs)
            acts.append([float(a)])
            costs.append(res.cost)
            dcosts.append(res.constraint_cost)
            logps.append(float(np.log(probs[x, a])))
            done = res.done
        T = len(acts)
        episodes.append(Episode(np.stack(states), np.array(acts),
                                np.array(costs), np.array(dcosts),
                                np.array(logps),
                                np.array([False] * (T - 1) + [True])))
    return TrajectoryBatch(episodes)


class TestLagrangianUpdates:
    def test_multiplier_fixed_point_at_threshold(self):
        state = LagrangeState(lam=0.5)
        new = lagrangian_lambda_update(state, np.full(8, 3.0), d0=3.0)
        assert new.lam == pytest.approx(0.5)

    def test_multiplier_projection_at_cap(self):
        state = LagrangeState(lam=2.0, lambda_max=2.0)
        new = lagrangian_lambda_update(state, np.full(4, 10.0), d0=1.0)
        assert new.lam == 2.0

    def test_multiplier_never_negative(self):
        state = LagrangeState(lam=0.0, alpha_lambda=1.0)
        new = lagrangian_lambda_update(state, np.zeros(4), d0=5.0)
        assert new.lam == 0.0

    def test_pg_direction_matches_exact_gradient(self):
        rng = np.random.default_rng(6)
        cmdp = random_cmdp(4, 2, 0.75, rng)
        adapter = SoftmaxTabularPolicyAdapter(4, 2)
        params = 0.3 * rng.standard_normal(8)
        batch = _gridworld_batch(cmdp, adapter, params, 3000, 45, rng)
        state = LagrangeState(lam=0.4)
        _, _, info = lagrangian_pg_update(adapter, params, batch, state,
                                          cmdp.gamma, d0=cmdp.d0)
        exact = exact_softmax_policy_gradient(cmdp, params, "cost",
                                              lam=state.lam)
        g = info["theta_grad"]
        cos = g @ exact / (np.linalg.norm(g) * np.linalg.norm(exact))
        assert cos >= 0.95

    def test_empty_batch_rejected(self):
        adapter = SoftmaxTabularPolicyAdapter(2, 2)
        with pytest.raises(ValueError):
            lagrangian_pg_update(adapter, np.zeros(4), TrajectoryBatch([]),
                                 LagrangeState(), 0.9, 1.0)

    def test_ac_zero_td_error_no_actor_change(self):
        adapter = SoftmaxTabularPolicyAdapter(2, 2)
        spec = MlpSpec(2, (4,), 1, "tanh")
        critic = CriticState(spec, np.zeros(spec.n_params))  # V = 0 everywhere
        obs = np.eye(2)[0]
        params = np.zeros(4)
        # cost 0 and V = 0 give delta = 0: neither network moves.
        new_params, delta = lagrangian_ac_update(
            adapter, params, critic, (obs, 0, 0.0, 0.0, np.eye(2)[1]),
            LagrangeState(), 0.9)
        assert delta == 0.0
        np.testing.assert_array_equal(new_params, params)
        np.testing.assert_array_equal(critic.values, np.zeros(spec.n_params))

    def test_ac_critic_converges_on_constant_chain(self):
        # Single-state chain with constant augmented cost: the TD fixed
        # point is (c + lam*d) / (1 - gamma).
        rng = np.random.default_rng(7)
        adapter = SoftmaxTabularPolicyAdapter(1, 1)
        spec = MlpSpec(1, (8,), 1, "tanh")
        from safepg.diff.mlp import init_params
        critic = CriticState(spec, init_params(spec, rng).values)
        lagrange = LagrangeState(lam=0.5, alpha_theta=0.0, alpha_critic=0.1)
        obs = np.ones(1)
        params = np.zeros(1)
        gamma = 0.9
        for _ in range(4000):
            params, _ = lagrangian_ac_update(
                adapter, params, critic, (obs, 0, 1.0, 1.0, obs),
                lagrange, gamma)
        exact = (1.0 + 0.5 * 1.0) / (1.0 - gamma)
        assert critic.value(obs) == pytest.approx(exact, rel=0.01)

    def test_nac_direction_uses_running_weight(self):
        adapter = SoftmaxTabularPolicyAdapter(2, 2)
        spec = MlpSpec(2, (4,), 1, "tanh")
        critic = CriticState(spec, np.zeros(spec.n_params))
        nac = NacState(w=np.zeros(4))
        obs = np.eye(2)[0]
        new_params, delta = lagrangian_ac_update(
            adapter, np.zeros(4), critic, (obs, 0, 1.0, 0.0, np.eye(2)[1]),
            LagrangeState(), 0.9, nac=nac)
        assert delta == pytest.approx(1.0)
        assert np.linalg.norm(nac.w) > 0
        np.testing.assert_allclose(
            new_params, -LagrangeState().alpha_theta * nac.w / 0.1)


def _critic_pair(rng, obs_dim=3, action_dim=2, zero_qw=False):
    qv = QCritic(obs_dim, action_dim, hidden=(8, 6))
    qw = QCritic(obs_dim, action_dim, hidden=(8, 6), zero_output=zero_qw)
    qv.setup(rng)
    qw.setup(rng)
    return qv, qw


class TestDdpgUpdate:
    def _batch(self, rng, n=16, obs_dim=3, action_dim=2):
        return {
            "obs": rng.standard_normal((n, obs_dim)),
            "actions": rng.uniform(-1, 1, (n, action_dim)),
            "costs": rng.uniform(0, 1, n),
            "constraint_costs": rng.uniform(0, 1, n),
            "next_obs": rng.standard_normal((n, obs_dim)),
            "done": np.zeros(n, dtype=bool),
        }

    def test_zero_learning_rates_freeze_parameters(self):
        rng = np.random.default_rng(8)
        actor = DeterministicActor(3, 2, hidden=(8, 6))
        params = actor.init(rng)
        target = params.copy()
        qv, qw = _critic_pair(rng)
        before = (params.values.copy(), qv.params.values.copy())
        cfg = SafePgConfig(actor_lr=0.0, critic_lr=0.0, target_tau=1e-9)
        ddpg_update(actor, params, target, CriticBundle(qv=qv, qw=qw),
                    self._batch(rng), cfg)
        np.testing.assert_array_equal(params.values, before[0])
        np.testing.assert_array_equal(qv.params.values, before[1])

    def test_empty_batch_rejected(self):
        rng = np.random.default_rng(9)
        actor = DeterministicActor(3, 2, hidden=(8, 6))
        params = actor.init(rng)
        qv, qw = _critic_pair(rng)
        empty = {k: v[:0] for k, v in self._batch(rng).items()}
        with pytest.raises(ValueError):
            ddpg_update(actor, params, params.copy(),
                        CriticBundle(qv=qv, qw=qw), empty, SafePgConfig())

    def test_q_converges_to_geometric_series(self):
        # Constant cost 1, single state, gamma = 0.9: Q -> 1/(1-gamma) = 10.
        rng = np.random.default_rng(10)
        gamma = 0.9
        q = QCritic(1, 1, hidden=(8, 8))
        q.setup(rng)
        obs = np.ones((8, 1))
        act = np.zeros((8, 1))
        for _ in range(4000):
            target = 1.0 + gamma * q.value(obs, act, use_target=True)
            q.train_step(obs, act, target, lr=0.1)
            q.soft_update(0.05)
        assert q.value(obs[:1], act[:1])[0] == pytest.approx(10.0, rel=0.01)

    def test_actor_gradient_matches_chain_rule_on_quadratic(self):
        # Critic Q(x, a) = -||a - a*||^2 has gradient 2(a* - a); the actor
        # gradient must match the analytic chain rule through tanh.
        rng = np.random.default_rng(11)
        actor = DeterministicActor(2, 2, hidden=(6, 6))
        params = actor.init(rng)
        obs = rng.standard_normal(2)
        a_star = np.array([0.3, -0.2])
        a = actor.action(params, obs)
        dq_da = 2.0 * (a_star - a)
        grad = actor.backward(params, obs, dq_da)
        h = 1e-6
        d = rng.standard_normal(params.spec.n_params)
        d /= np.linalg.norm(d)

        def f(v):
            av = actor.action(ParamVector(actor.spec, v), obs)
            return -float(np.sum((av - a_star) ** 2))

        fd = (f(params.values + h * d) - f(params.values - h * d)) / (2 * h)
        assert fd == pytest.approx(float(grad @ d), rel=1e-5, abs=1e-9)

    def test_inactive_projection_grad_equals_unconstrained(self):
        rng = np.random.default_rng(12)
        actor = DeterministicActor(3, 2, hidden=(8, 6))
        params = actor.init(rng)
        qv, qw = _critic_pair(rng)
        obs = rng.standard_normal(3)
        baseline = actor.action(params, obs)
        grad, res = a_projection_actor_grad(actor, params, qv, qw, obs,
                                            baseline, epsilon_tilde=100.0)
        assert not res.active
        dq_da = qv.action_grad(obs, actor.action(params, obs))
        np.testing.assert_allclose(grad, actor.backward(params, obs, dq_da))

    def test_theta_mode_with_zero_multiplier_matches_unconstrained(self):
        rng_a, rng_b = (np.random.default_rng(13) for _ in range(2))
        results = []
        for mode, rng in (("unconstrained", rng_a), ("theta", rng_b)):
            actor = DeterministicActor(3, 2, hidden=(8, 6))
            params = actor.init(rng)
            qv, qw = _critic_pair(rng, zero_qw=True)
            batch_rng = np.random.default_rng(14)
            ddpg_update(actor, params, params.copy(),
                        CriticBundle(qv=qv, qw=qw), self._batch(batch_rng),
                        SafePgConfig(), mode=mode, epsilon_tilde=0.5)
            results.append(params.values.copy())
        np.testing.assert_array_equal(results[0], results[1])

    def test_safeguard_step_descends_constraint_critic(self):
        rng = np.random.default_rng(15)
        actor = DeterministicActor(3, 2, hidden=(8, 6))
        params = actor.init(rng)
        qv, qw = _critic_pair(rng)
        batch = self._batch(np.random.default_rng(16), n=32)
        before = float(np.mean(qw.value(
            batch["obs"], actor.action(params, batch["obs"]))))
        qw_snapshot = qw.params.copy()
        cfg = SafePgConfig(actor_lr=0.01, critic_lr=0.0, target_tau=1e-9)
        ddpg_update(actor, params, params.copy(),
                    CriticBundle(qv=qv, qw=qw), batch, cfg, mode="theta",
                    safeguard=True)
        qw.params = qw_snapshot
        after = float(np.mean(qw.value(
            batch["obs"], actor.action(params, batch["obs"]))))
        assert after < before


class TestPpoAgent:
    def _agent(self, mode="unconstrained", d0=np.inf, **cfg_kw):
        cfg = SafePgConfig(**cfg_kw)
        agent = PpoAgent(3, 2, d0=d0, config=cfg, mode=mode, hidden=(8, 6))
        return agent.setup(np.random.default_rng(20))

    def _batch(self, agent, n_episodes=4, T=6, seed=21):
        rng = np.random.default_rng(seed)
        episodes = []
        for _ in range(n_episodes):
            states = rng.standard_normal((T + 1, 3))
            actions = np.empty((T, 2))
            logps = np.empty(T)
            for t in range(T):
                actions[t], logps[t] = agent.act(states[t], rng)
            episodes.append(Episode(states, actions, rng.uniform(0, 1, T),
                                    rng.uniform(0, 1, T), logps,
                                    np.array([False] * (T - 1) + [True])))
        return TrajectoryBatch(episodes)

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            self._agent().update(TrajectoryBatch([]))

    def test_zero_cost_signal_no_step(self):
        agent = self._agent()
        batch = self._batch(agent)
        for ep in batch.episodes:
            ep.costs[:] = 0.0
            ep.constraint_costs[:] = 0.0
        # Zero the value critic too, so advantages are exactly zero (a fresh
        # critic would inject a nonzero gamma*V(x') - V(x) baseline term).
        agent.bundle_.v.params.values[:] = 0.0
        before = agent.params_.values.copy()
        info = agent.update(batch)
        np.testing.assert_array_equal(agent.params_.values, before)
        assert info["kl"] == 0.0

    def test_huge_penalty_freezes_policy(self):
        agent = self._agent(beta=1e6, beta_max=1e6)
        info = agent.update(self._batch(agent))
        assert info["step_norm"] <= 1e-4

    def test_beta_adaptation_direction(self):
        agent = self._agent(beta=1e-3, kl_target=1e-6)
        info = agent.update(self._batch(agent))
        assert info["kl"] > 2e-6
        assert agent.beta_ > 1e-3

    def test_theta_step_respects_constraint_linearization(self):
        agent = self._agent(mode="theta", d0=0.5)
        agent.observe_constraint(0.45)  # nearly exhausted budget
        batch = self._batch(agent, seed=22)
        old = agent.params_.copy()
        info = agent.update(batch)
        if info["lam"] > 0.0:
            # Multiplier only activates when the unconstrained step would
            # overdraw the linearized budget.
            assert not info["degenerate"]
        assert np.all(np.isfinite(agent.params_.values))
        assert np.linalg.norm(agent.params_.values - old.values) > 0

    def test_safeguard_descends_constraint_surrogate(self):
        agent = self._agent(mode="theta", d0=0.2)
        agent.observe_constraint(5.0)  # far beyond the threshold
        assert agent.safeguard_
        batch = self._batch(agent, seed=23)
        old = agent.params_.values.copy()
        info = agent.update(batch)
        assert info["safeguard"]
        step = agent.params_.values - old
        # Recompute the constraint gradient at the old parameters.
        agent.params_.values[:] = old
        scores = np.stack([agent._score(s, a) for s, a in
                           zip(batch.all_states(), batch.all_actions())])
        from safepg.diff.trajectories import batch_gae
        adv_d = np.concatenate(batch_gae(
            batch, agent.bundle_.w.value, agent.config_.gamma,
            agent.config_.gae_lambda, "constraint"))
        gamma_pow = np.concatenate(
            [agent.config_.gamma ** np.arange(ep.length)
             for ep in batch.episodes])
        g_d = scores.T @ (gamma_pow * adv_d) / len(batch)
        assert float(step @ g_d) < 0.0

    def test_action_mode_projected_sampling_feasible(self):
        agent = self._agent(mode="action", d0=1.0)
        agent.observe_constraint(0.9)
        # Force a nonzero constraint-critic so the layer has a gradient.
        rng = np.random.default_rng(24)
        agent.bundle_.qw.params.values[:] = 0.3 * rng.standard_normal(
            agent.bundle_.qw.spec.n_params)
        obs = rng.standard_normal(3)
        mean, std = agent.dist_at(obs)
        a_base = agent.policy_.mean_std(agent.baseline_params_, obs)[0]
        g = agent.bundle_.qw.action_grad(obs, a_base)
        assert float(g @ (mean - a_base)) <= agent.eps_action_ + 1e-9
        assert np.all(std > 0)

    def test_predict_returns_mean_actions(self):
        agent = self._agent()
        obs = np.random.default_rng(25).standard_normal((4, 3))
        out = agent.predict(obs)
        assert out.shape == (4, 2)
        np.testing.assert_array_equal(out[0], agent.act(obs[0],
                                                        explore=False)[0])
