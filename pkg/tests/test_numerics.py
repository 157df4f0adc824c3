import math

import numpy as np
import pytest

from fimstar.numerics import PrngStream, gaussian_q, gaussian_q_inv, sample_cgauss

# frozen via a high-precision erfc/bisection oracle (50-digit arithmetic)
Q_AT_2 = 0.0227501319481792072
QINV_AT_1E5 = 4.2648907939228246


def test_cgauss_zero_variance_is_exactly_zero():
    z = sample_cgauss(PrngStream(1), 0.0)
    assert z == 0 + 0j


def test_cgauss_negative_variance_rejected():
    with pytest.raises(ValueError):
        sample_cgauss(PrngStream(1), -1e-9)


def test_cgauss_power_calibration():
    z = sample_cgauss(PrngStream(42), 1.0, size=100_000)
    # |z|^2 is Exp(1): mean 1, se 1/sqrt(n); spec bound is wider than 3 sigma
    assert abs(np.mean(np.abs(z) ** 2) - 1.0) < 0.02


def test_cgauss_requested_variance():
    z = sample_cgauss(PrngStream(7), 2.5, size=100_000)
    emp = np.mean(np.abs(z) ** 2)
    se = 2.5 / math.sqrt(len(z))
    assert abs(emp - 2.5) < 3 * se


def test_stream_is_a_value():
    s = PrngStream(123, 5)
    a = sample_cgauss(s, 1.0, size=16)
    b = sample_cgauss(s, 1.0, size=16)
    np.testing.assert_array_equal(a, b)


def test_substreams_differ_and_are_stable():
    root = PrngStream(9)
    a = sample_cgauss(root.substream(0), 1.0, size=8)
    b = sample_cgauss(root.substream(1), 1.0, size=8)
    assert not np.allclose(a, b)
    np.testing.assert_array_equal(a, sample_cgauss(PrngStream(9).substream(0), 1.0, size=8))


def test_substream_paths_never_collide():
    root = PrngStream(1)
    seen = {root.substream(0).substream(1).stream_id,
            root.substream(1).stream_id,
            root.substream(0).stream_id}
    assert len(seen) == 3


def test_gaussian_q_at_zero():
    assert gaussian_q(0.0) == 0.5


def test_gaussian_q_at_two():
    assert abs(gaussian_q(2.0) - Q_AT_2) < 1e-7


def test_gaussian_q_reflection():
    x = 1.3
    assert gaussian_q(-x) == pytest.approx(1.0 - gaussian_q(x), abs=1e-15)


def test_gaussian_q_inv_median():
    assert gaussian_q_inv(0.5) == pytest.approx(0.0, abs=1e-12)


def test_gaussian_q_inv_known_points():
    assert abs(gaussian_q_inv(0.0227501) - 2.0000) < 1e-4
    assert abs(gaussian_q_inv(1e-5) - QINV_AT_1E5) < 1e-3


@pytest.mark.parametrize("eps", [0.0, 1.0, -0.1, 1.1])
def test_gaussian_q_inv_domain(eps):
    with pytest.raises(ValueError):
        gaussian_q_inv(eps)


def _bisect_qinv(eps, lo=-40.0, hi=40.0):
    # independent oracle: bisection on gaussian_q only
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gaussian_q(mid) > eps:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.mark.parametrize("eps", [1e-8, 1e-5, 1e-3, 0.1, 0.3, 0.7, 0.99, 1 - 1e-6])
def test_gaussian_q_inv_matches_bisection(eps):
    assert gaussian_q_inv(eps) == pytest.approx(_bisect_qinv(eps), abs=1e-9)


def test_round_trip_relative_accuracy():
    # log-spaced grid over both tails plus the center
    eps = np.concatenate([
        np.logspace(-9, math.log10(0.5), 500),
        1.0 - np.logspace(-9, math.log10(0.5), 500),
    ])
    for e in eps:
        back = gaussian_q(gaussian_q_inv(float(e)))
        assert abs(back - e) / e < 1e-8


def test_gaussian_q_inv_strictly_decreasing():
    grid = np.linspace(1e-6, 1 - 1e-6, 2000)
    values = [gaussian_q_inv(float(e)) for e in grid]
    assert all(a > b for a, b in zip(values, values[1:]))
