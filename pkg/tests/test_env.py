
import numpy as np
import pytest

from fimstar.env import EnvConfig, FimStarEnv, action_dim, decode_action, state_dim
from fimstar.fbl import LinkBudget
from fimstar.numerics import PrngStream


def make_cfg(p_y=2, p_z=2, f=4, n=2, d=3, gamma_min=0.0, p_max=1.0, sigma2=0.1,
             episode_len=5, redraw=True):
    budget = LinkBudget(np.full(n, sigma2), np.full(n, 1e-5), 128,
                        np.full(n, float(gamma_min)), p_max)
    return EnvConfig(p_y=p_y, p_z=p_z, f=f, n=n, d=d, budget=budget,
                     x_max=0.005, wavelength=0.01, r_y=0.005, r_z=0.005,
                     episode_len=episode_len, redraw_per_episode=redraw)


def test_dimension_formulas():
    cfg = make_cfg(p_y=2, p_z=2, f=4, n=2)
    assert state_dim(cfg) == 2 * 8 + 2 * 16 + 2 * 8 + 4 == 68
    assert action_dim(cfg) == 4 + 16 + 16


def test_p_must_cover_users():
    with pytest.raises(ValueError):
        make_cfg(p_y=1, p_z=1, n=2)


class TestDecode:
    def test_lower_saturation(self):
        cfg = make_cfg()
        a = np.zeros(action_dim(cfg))
        a[:cfg.p] = -1.0
        sol = decode_action(a, cfg)
        np.testing.assert_array_equal(sol.x, np.zeros(cfg.p))
        np.testing.assert_array_equal(sol.w, np.zeros((cfg.p, cfg.n), dtype=complex))
        np.testing.assert_array_equal(sol.star.beta, np.full(cfg.f, 0.5))

    def test_upper_saturation(self):
        cfg = make_cfg()
        a = np.zeros(action_dim(cfg))
        a[:cfg.p] = 1.0
        sol = decode_action(a, cfg)
        np.testing.assert_array_equal(sol.x, np.full(cfg.p, cfg.x_max))

    def test_power_cap_only_rescales_overshoot(self):
        cfg = make_cfg(p_max=1000.0)
        gen = np.random.default_rng(0)
        a = gen.uniform(-1, 1, action_dim(cfg))
        sol = decode_action(a, cfg)
        pn = cfg.p * cfg.n
        w_raw = a[cfg.p:cfg.p + pn].reshape(cfg.p, cfg.n) \
            + 1j * a[cfg.p + pn:cfg.p + 2 * pn].reshape(cfg.p, cfg.n)
        np.testing.assert_array_equal(sol.w, w_raw)  # under the cap: untouched

    def test_random_actions_always_feasible(self):
        cfg = make_cfg(p_max=0.5)
        env = FimStarEnv(cfg, PrngStream(1).substream(0))
        env.reset()
        gen = np.random.default_rng(1)
        for _ in range(1000):
            a = gen.uniform(-1, 1, action_dim(cfg))
            _, report = env.evaluate_action(a)
            kinds = {v[0] for v in report.violations}
            assert not kinds & {"power", "morph", "energy_split"}

    def test_wrong_length_rejected(self):
        cfg = make_cfg()
        with pytest.raises(ValueError):
            decode_action(np.zeros(3), cfg)


class TestEpisodes:
    def test_reset_deterministic(self):
        cfg = make_cfg()
        s1 = FimStarEnv(cfg, PrngStream(3)).reset()
        s2 = FimStarEnv(cfg, PrngStream(3)).reset()
        np.testing.assert_array_equal(s1, s2)
        assert len(s1) == state_dim(cfg)

    def test_fixed_channel_mode(self):
        cfg = make_cfg(redraw=False)
        env = FimStarEnv(cfg, PrngStream(4))
        block = state_dim(cfg) - 2 * cfg.n  # channel slots
        s1 = env.reset()
        s2 = env.reset()
        np.testing.assert_array_equal(s1[:block], s2[:block])

    def test_redraw_changes_channels(self):
        cfg = make_cfg(redraw=True)
        env = FimStarEnv(cfg, PrngStream(4))
        block = state_dim(cfg) - 2 * cfg.n
        s1 = env.reset()
        s2 = env.reset()
        assert not np.allclose(s1[:block], s2[:block])

    def test_step_before_reset_is_usage_error(self):
        env = FimStarEnv(make_cfg(), PrngStream(5))
        with pytest.raises(RuntimeError):
            env.step(np.zeros(action_dim(env.cfg)))

    def test_episode_length_and_done(self):
        cfg = make_cfg(episode_len=3)
        env = FimStarEnv(cfg, PrngStream(6))
        env.reset()
        flags = []
        for _ in range(3):
            _, _, done = env.step(np.zeros(action_dim(cfg)))
            flags.append(done)
        assert flags == [False, False, True]


class TestReward:
    def test_vacuous_qos_gives_positive_reward(self):
        cfg = make_cfg(gamma_min=0.0)
        env = FimStarEnv(cfg, PrngStream(7))
        env.reset()
        gen = np.random.default_rng(2)
        for _ in range(20):
            a = gen.uniform(-1, 1, action_dim(cfg))
            _, r, _ = env.step(a)
            assert r >= 0.0

    def test_reward_magnitude_matches_clamped_sum(self):
        cfg = make_cfg(gamma_min=0.0)
        env = FimStarEnv(cfg, PrngStream(8))
        env.reset()
        a = np.random.default_rng(3).uniform(-1, 1, action_dim(cfg))
        _, report = env.evaluate_action(a)
        _, r, _ = env.step(a)
        assert r == pytest.approx(float(np.maximum(report.rate, 0.0).sum()), abs=1e-12)

    def test_antisymmetry_under_forced_infeasibility(self):
        # same channels and action; only the SINR floor differs
        lo = make_cfg(gamma_min=0.0)
        env_lo = FimStarEnv(lo, PrngStream(9))
        env_lo.reset()
        a = np.random.default_rng(4).uniform(-1, 1, action_dim(lo))
        _, report = env_lo.evaluate_action(a)
        _, r_feasible, _ = env_lo.step(a)
        assert r_feasible >= 0

        hi = make_cfg(gamma_min=float(report.gamma.max()) * 2.0)
        env_hi = FimStarEnv(hi, PrngStream(9))
        env_hi.reset()
        _, r_flipped, _ = env_hi.step(a)
        assert r_flipped == pytest.approx(-r_feasible, abs=1e-12)

    def test_infeasible_reward_sign(self):
        cfg = make_cfg(gamma_min=1e9)
        env = FimStarEnv(cfg, PrngStream(10))
        env.reset()
        _, r, _ = env.step(np.random.default_rng(5).uniform(-1, 1, action_dim(cfg)))
        assert r <= 0.0


def test_trajectory_fully_determined_by_seed_and_actions():
    cfg = make_cfg()
    actions = np.random.default_rng(6).uniform(-1, 1, (5, action_dim(cfg)))
    traces = []
    for _ in range(2):
        env = FimStarEnv(cfg, PrngStream(11))
        s = env.reset()
        trace = [s]
        for a in actions:
            s, r, _ = env.step(a)
            trace.append(np.append(s, r))
        traces.append(np.concatenate(trace))
    np.testing.assert_array_equal(traces[0], traces[1])
