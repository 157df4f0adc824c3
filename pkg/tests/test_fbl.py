import math

import numpy as np
import pytest

from fimstar.channel import ChannelSet
from fimstar.fbl import (
    LinkBudget,
    SolutionPoint,
    dispersion,
    effective_channel,
    evaluate,
    fbl_rate,
    sinr,
)
from fimstar.star import StarConfig, build_matrices

# frozen with 50-digit arithmetic
V_AT_1 = 1.5610267357542058
V_LIMIT = 2.0813689810056078
FBL_10_1E5_100 = 2.8466857496652126


def budget(n, sigma2=1.0, eps=1e-5, m_d=128, gamma_min=0.0, p_max=10.0):
    return LinkBudget(np.full(n, sigma2), np.full(n, eps), m_d,
                      np.full(n, float(gamma_min)), p_max)


def random_channels(gen, p, f, n):
    t = gen.standard_normal((p, n)) + 1j * gen.standard_normal((p, n))
    h = gen.standard_normal((p, f)) + 1j * gen.standard_normal((p, f))
    k = gen.standard_normal((f, n)) + 1j * gen.standard_normal((f, n))
    sector = tuple("transmit" if i % 2 == 0 else "reflect" for i in range(n))
    return ChannelSet(t, h, k, sector)


def random_star(gen, f):
    return StarConfig(gen.uniform(0, 2 * math.pi, f), gen.uniform(0, 2 * math.pi, f),
                      gen.uniform(0, 1, f))


class TestEffectiveChannel:
    def test_zero_surface_leaves_direct_path(self):
        gen = np.random.default_rng(0)
        ch = random_channels(gen, 3, 2, 2)
        omega = (np.zeros((2, 2), dtype=complex), np.zeros((2, 2), dtype=complex))
        np.testing.assert_allclose(effective_channel(ch, omega, 0), ch.t[:, 0])

    def test_single_element_relay(self):
        p, f = 3, 1
        t = np.zeros((p, 1), dtype=complex)
        h = np.zeros((p, f), dtype=complex)
        h[0, 0] = 1.0
        k = np.ones((f, 1), dtype=complex)
        ch = ChannelSet(t, h, k, ("transmit",))
        omega = (np.eye(1, dtype=complex), np.zeros((1, 1), dtype=complex))
        expected = np.zeros(p, dtype=complex)
        expected[0] = 1.0
        np.testing.assert_allclose(effective_channel(ch, omega, 0), expected)

    def test_matches_scalar_oracle(self):
        gen = np.random.default_rng(1)
        p, f, n = 3, 2, 2
        ch = random_channels(gen, p, f, n)
        star = build_matrices(random_star(gen, f))
        for user in range(n):
            omega = star[0] if ch.sector[user] == "transmit" else star[1]
            # v_p = sum_f h[p,f] * conj(omega[f,f]) * k[f,user] + t[p,user]
            expected = np.zeros(p, dtype=complex)
            for pi in range(p):
                acc = ch.t[pi, user]
                for fi in range(f):
                    acc += ch.h[pi, fi] * np.conj(omega[fi, fi]) * ch.k[fi, user]
                expected[pi] = acc
            np.testing.assert_allclose(effective_channel(ch, star, user), expected,
                                       atol=1e-12)


class TestSinr:
    def test_single_user_no_interference(self):
        gen = np.random.default_rng(2)
        ch = random_channels(gen, 4, 2, 1)
        star = build_matrices(random_star(gen, 2))
        w = gen.standard_normal((4, 1)) + 1j * gen.standard_normal((4, 1))
        v = effective_channel(ch, star, 0)
        expected = abs(np.vdot(v, w[:, 0])) ** 2 / 2.5
        got = sinr(ch, star, w, budget(1, sigma2=2.5))
        assert got[0] == pytest.approx(expected, rel=1e-12)

    def test_zero_beamformer(self):
        gen = np.random.default_rng(3)
        ch = random_channels(gen, 3, 2, 3)
        star = build_matrices(random_star(gen, 2))
        got = sinr(ch, star, np.zeros((3, 3), dtype=complex), budget(3))
        np.testing.assert_array_equal(got, np.zeros(3))

    def test_matches_bruteforce_oracle(self):
        gen = np.random.default_rng(4)
        for _ in range(20):
            ch = random_channels(gen, 3, 2, 3)
            star = build_matrices(random_star(gen, 2))
            w = gen.standard_normal((3, 3)) + 1j * gen.standard_normal((3, 3))
            got = sinr(ch, star, w, budget(3, sigma2=0.37))
            for n_user in range(3):
                v = effective_channel(ch, star, n_user)
                num = abs(np.vdot(v, w[:, n_user])) ** 2
                den = 0.37
                for other in range(3):
                    if other != n_user:
                        den += abs(np.vdot(v, w[:, other])) ** 2
                assert got[n_user] == pytest.approx(num / den, rel=1e-10)


class TestDispersion:
    def test_zero(self):
        assert dispersion(0.0) == 0.0

    def test_high_sinr_limit(self):
        assert dispersion(1e9) == pytest.approx(V_LIMIT, abs=1e-6)

    def test_unit_sinr(self):
        assert dispersion(1.0) == pytest.approx(V_AT_1, abs=1e-12)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            dispersion(-0.1)


class TestFblRate:
    def test_zero_sinr(self):
        assert fbl_rate(0.0, 1e-5, 128) == 0.0

    def test_median_eps_is_shannon(self):
        for gamma in (0.1, 1.0, 7.3, 100.0):
            assert fbl_rate(gamma, 0.5, 128) == pytest.approx(math.log2(1 + gamma),
                                                              abs=1e-12)

    def test_frozen_value(self):
        assert fbl_rate(10.0, 1e-5, 100) == pytest.approx(FBL_10_1E5_100, abs=1e-9)

    def test_monotone_in_sinr_past_the_dip(self):
        # the sqrt-dispersion penalty outgrows the Shannon term near zero, so
        # the rate dips below zero first (minimum near gamma ~ 0.06 for these
        # parameters) and is strictly increasing beyond it
        grid = np.linspace(0.12, 50.0, 500)
        vals = [fbl_rate(float(g), 1e-5, 128) for g in grid]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_dip_below_zero_near_origin(self):
        assert fbl_rate(0.05, 1e-5, 128) < fbl_rate(0.0, 1e-5, 128) == 0.0

    def test_penalty_sign(self):
        for gamma in np.linspace(0.001, 30, 200):
            assert fbl_rate(float(gamma), 1e-5, 128) < math.log2(1 + gamma)

    def test_blocklength_limit(self):
        gamma = 3.7
        assert abs(fbl_rate(gamma, 1e-5, 10**9) - math.log2(1 + gamma)) < 1e-3

    def test_bad_blocklength(self):
        with pytest.raises(ValueError):
            fbl_rate(1.0, 1e-5, 0)


def test_sinr_scale_invariance_at_vanishing_noise():
    gen = np.random.default_rng(5)
    ch = random_channels(gen, 4, 3, 3)
    star = build_matrices(random_star(gen, 3))
    w = gen.standard_normal((4, 3)) + 1j * gen.standard_normal((4, 3))
    b = budget(3, sigma2=1e-30)
    base = sinr(ch, star, w, b)
    scaled = sinr(ch, star, 7.0 * w, b)
    np.testing.assert_allclose(scaled, base, rtol=1e-6)


class TestEvaluate:
    def _instance(self, gen, n=2, gamma_min=0.0, p_max=100.0):
        p, f = 3, 2
        ch = random_channels(gen, p, f, n)
        star = random_star(gen, f)
        w = gen.standard_normal((p, n)) + 1j * gen.standard_normal((p, n))
        w *= math.sqrt(min(1.0, p_max / np.sum(np.abs(w) ** 2)))
        sol = SolutionPoint(np.full(p, 0.001), w, star)
        return sol, ch, budget(n, gamma_min=gamma_min, p_max=p_max)

    def test_vacuous_qos_is_feasible(self):
        sol, ch, b = self._instance(np.random.default_rng(6))
        report = evaluate(sol, ch, b, x_max=0.01)
        assert report.feasible and report.violations == ()

    def test_sinr_violation_named(self):
        gen = np.random.default_rng(7)
        sol, ch, _ = self._instance(gen)
        base = evaluate(sol, ch, budget(2), x_max=0.01)
        floor = np.array([base.gamma[0] * 2, 0.0])
        strict = LinkBudget(np.full(2, 1.0), np.full(2, 1e-5), 128, floor, 100.0)
        report = evaluate(sol, ch, strict, x_max=0.01)
        assert not report.feasible
        assert report.violations == (("sinr_min", 0),)

    def test_power_violation(self):
        gen = np.random.default_rng(8)
        sol, ch, _ = self._instance(gen)
        tight = LinkBudget(np.full(2, 1.0), np.full(2, 1e-5), 128, np.zeros(2),
                           float(np.sum(np.abs(sol.w) ** 2)) / 2)
        report = evaluate(sol, ch, tight, x_max=0.01)
        assert ("power", 0) in report.violations

    def test_morph_violation(self):
        gen = np.random.default_rng(9)
        sol, ch, b = self._instance(gen)
        bad = SolutionPoint(np.array([0.0, 0.02, 0.001]), sol.w, sol.star)
        report = evaluate(bad, ch, b, x_max=0.01)
        assert ("morph", 1) in report.violations

    def test_sum_rate_consistency(self):
        gen = np.random.default_rng(10)
        sol, ch, b = self._instance(gen)
        report = evaluate(sol, ch, b, x_max=0.01)
        recomputed = sum(fbl_rate(float(g), 1e-5, 128) for g in report.gamma)
        assert report.sum_rate == pytest.approx(recomputed, abs=1e-12)

    def test_deterministic(self):
        gen = np.random.default_rng(11)
        sol, ch, b = self._instance(gen)
        r1 = evaluate(sol, ch, b, x_max=0.01)
        r2 = evaluate(sol, ch, b, x_max=0.01)
        np.testing.assert_array_equal(r1.gamma, r2.gamma)
        np.testing.assert_array_equal(r1.rate, r2.rate)
        assert r1.violations == r2.violations
