import numpy as np
import pytest

from safepg.cmdp import TabularCmdp, TabularPolicy, discounted_visitation, policy_evaluate, random_cmdp
from safepg.envs import EnvConfig, EpisodeOver, GridworldEnv, PointCircleEnv, PointGatherEnv


def quiet_config(**kw):
    defaults = dict(noise_std=0.0)
    defaults.update(kw)
    return EnvConfig(**defaults)


class TestPointCircle:
    def test_tangential_motion_reward(self):
        env = PointCircleEnv(quiet_config())
        env.reset(0)
        env.pos = np.array([15.0, 0.0])
        env.vel = np.array([0.0, 1.0])
        # Place the point on the circle moving counter-clockwise; one noise-free
        # step keeps dy = 1 and the reward formula gives ~r / (1 + drift).
        res = env.step(np.zeros(2))
        x, y = env.pos
        dx, dy = env.vel
        expected = (-dx * y + dy * x) / (1 + abs(np.hypot(x, y) - 15))
        assert res.cost == pytest.approx(-expected)
        assert expected == pytest.approx(15.0, rel=0.01)

    def test_reward_formula_static_point(self):
        # Direct substitution: position (15, 0), velocity (0, 1) -> reward 15.
        x, y, dx, dy = 15.0, 0.0, 0.0, 1.0
        reward = (-dx * y + dy * x) / (1 + abs(np.hypot(x, y) - 15))
        assert reward == pytest.approx(15.0)

    def test_constraint_indicator(self):
        env = PointCircleEnv(quiet_config())
        env.reset(0)
        env.pos = np.array([3.0, 0.0])
        env.vel = np.zeros(2)
        res = env.step(np.zeros(2))
        assert res.constraint_cost == 1.0

    def test_zero_velocity_zero_reward(self):
        env = PointCircleEnv(quiet_config())
        env.reset(0)
        env.pos = np.array([4.0, -7.0])
        env.vel = np.zeros(2)
        res = env.step(np.zeros(2))
        assert res.cost == pytest.approx(0.0)
        assert res.constraint_cost == 1.0  # |x| = 4 > 2.5

    def test_episode_length_and_overrun(self):
        env = PointCircleEnv(EnvConfig(episode_len=65))
        env.reset(1)
        for t in range(65):
            res = env.step(np.array([0.1, -0.1]))
        assert res.done
        with pytest.raises(EpisodeOver):
            env.step(np.zeros(2))


class TestPointGather:
    def test_reset_counts(self):
        env = PointGatherEnv()
        env.reset(3)
        assert len(env.apples) == 2
        assert len(env.bombs) == 8

    def test_same_seed_same_layout(self):
        env1, env2 = PointGatherEnv(), PointGatherEnv()
        env1.reset(42)
        env2.reset(42)
        np.testing.assert_array_equal(np.array(env1.apples), np.array(env2.apples))
        np.testing.assert_array_equal(np.array(env1.bombs), np.array(env2.bombs))

    def test_spawn_free_disk(self):
        env = PointGatherEnv()
        for seed in range(1000):
            env.reset(seed)
            for p in env.apples + env.bombs:
                assert np.linalg.norm(p) > env.config.spawn_free_radius

    def test_no_touch_zero_cost(self):
        env = PointGatherEnv(EnvConfig(episode_len=15, d0=2.0, noise_std=0.0))
        env.reset(5)
        env.apples = [np.array([4.0, 4.0])]
        env.bombs = [np.array([-4.0, -4.0])]
        res = env.step(np.zeros(2))
        assert res.cost == 0.0
        assert res.constraint_cost == 0.0

    def test_apple_touch(self):
        env = PointGatherEnv(EnvConfig(episode_len=15, d0=2.0, noise_std=0.0))
        env.reset(6)
        env.apples = [np.array([0.0, 0.01])]
        env.bombs = []
        res = env.step(np.zeros(2))
        assert res.cost == pytest.approx(-10.0)
        assert res.constraint_cost == 0.0
        assert env.apples == []

    def test_bomb_touch(self):
        env = PointGatherEnv(EnvConfig(episode_len=15, d0=2.0, noise_std=0.0))
        env.reset(7)
        env.apples = []
        env.bombs = [np.array([0.0, 0.01])]
        res = env.step(np.zeros(2))
        assert res.cost == pytest.approx(10.0)
        assert res.constraint_cost == 1.0
        assert env.bombs == []

    def test_constraint_return_bounded_by_bombs(self):
        rng = np.random.default_rng(0)
        env = PointGatherEnv()
        for seed in range(20):
            env.reset(seed)
            total = 0.0
            done = False
            while not done:
                res = env.step(rng.uniform(-1, 1, size=2))
                total += res.constraint_cost
                done = res.done
            assert 0.0 <= total <= 8.0

    def test_determinism_full_trajectory(self):
        actions = np.random.default_rng(1).uniform(-1, 1, size=(15, 2))
        outs = []
        for _ in range(2):
            env = PointGatherEnv()
            obs = [env.reset(9)]
            costs = []
            for a in actions:
                res = env.step(a)
                obs.append(res.obs)
                costs.append((res.cost, res.constraint_cost))
            outs.append((np.array(obs), costs))
        np.testing.assert_array_equal(outs[0][0], outs[1][0])
        assert outs[0][1] == outs[1][1]


class TestGridworldEnv:
    def test_deterministic_chain(self):
        P = np.zeros((3, 1, 3))
        P[0, 0, 1] = 1.0
        P[1, 0, 2] = 1.0
        P[2, 0, 2] = 1.0
        cmdp = TabularCmdp(P, np.zeros((3, 1)), np.zeros(3), 0.9, 0, 1.0)
        env = GridworldEnv(cmdp, episode_len=4)
        env.reset(0)
        states = [env.state]
        for _ in range(4):
            env.step(0)
            states.append(env.state)
        assert states == [0, 1, 2, 2, 2]

    def test_monte_carlo_constraint_value(self):
        rng = np.random.default_rng(2)
        cmdp = random_cmdp(3, 2, 0.8, rng)
        pi = TabularPolicy.random(3, 2, rng)
        exact = policy_evaluate(cmdp, pi, which="constraint")[cmdp.x0]
        env = GridworldEnv(cmdp, episode_len=80)
        n_ep = 4000
        vals = np.empty(n_ep)
        for ep in range(n_ep):
            env.reset(10_000 + ep)
            total, g = 0.0, 1.0
            done = False
            while not done:
                a = rng.choice(2, p=pi.probs[env.state])
                res = env.step(a)
                total += g * res.constraint_cost
                g *= cmdp.gamma
                done = res.done
            vals[ep] = total
        se = vals.std(ddof=1) / np.sqrt(n_ep)
        assert abs(vals.mean() - exact) <= 3 * se + 1e-6

    def test_monte_carlo_visitation(self):
        rng = np.random.default_rng(3)
        cmdp = random_cmdp(3, 2, 0.8, rng)
        pi = TabularPolicy.random(3, 2, rng)
        mu = discounted_visitation(cmdp, pi)
        env = GridworldEnv(cmdp, episode_len=80)
        n_ep = 4000
        freq = np.zeros((n_ep, 3))
        for ep in range(n_ep):
            env.reset(20_000 + ep)
            g = 1.0
            done = False
            while not done:
                freq[ep, env.state] += g
                a = rng.choice(2, p=pi.probs[env.state])
                done = env.step(a).done
                g *= cmdp.gamma
        est = (1 - cmdp.gamma) * freq
        se = est.std(axis=0, ddof=1) / np.sqrt(n_ep)
        assert np.all(np.abs(est.mean(axis=0) - mu) <= 3 * se + 1e-6)
