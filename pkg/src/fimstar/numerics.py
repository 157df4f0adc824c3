"""Seeded randomness and Gaussian tail utilities.

Everything downstream (channel draws, exploration noise, batch sampling)
pulls randomness through :class:`PrngStream` so that a (seed, stream_id)
pair fully determines a run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PrngStream",
    "sample_cgauss",
    "gaussian_q",
    "gaussian_q_inv",
]

# Children of one stream are packed into base-2^32 digits of stream_id, so
# distinct substream paths can never collide.
_SUBSTREAM_RADIX = 2**32


@dataclass(frozen=True)
class PrngStream:
    """A value-semantics random stream: same (seed, stream_id) -> same draws.

    ``generator()`` returns a *fresh* numpy Generator each call, so library
    functions taking a PrngStream are pure: calling them twice with the same
    stream yields identical results. Stateful consumers (training loops)
    should derive labelled substreams instead of sharing one generator.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if self.seed < 0 or self.stream_id < 0:
            raise ValueError("seed and stream_id must be non-negative")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([self.seed, self.stream_id]))
        )

    def substream(self, label: int) -> "PrngStream":
        """Derive an independent child stream; labels below 2^32 - 1 never collide."""
        if not 0 <= label < _SUBSTREAM_RADIX - 1:
            raise ValueError("substream label out of range")
        return PrngStream(self.seed, self.stream_id * _SUBSTREAM_RADIX + label + 1)


def sample_cgauss(rng, variance, size=None):
    """Circularly-symmetric complex Gaussian, E[|z|^2] = variance.

    ``rng`` may be a PrngStream (pure: a fresh generator is derived) or a
    numpy Generator (stateful: consumes the generator). Returns a scalar
    when size is None, else an array of the given shape.
    """
    if variance < 0:
        raise ValueError(f"variance must be >= 0, got {variance}")
    gen = rng.generator() if isinstance(rng, PrngStream) else rng
    n = 1 if size is None else int(np.prod(size))
    g = gen.standard_normal(2 * n) * math.sqrt(variance / 2.0)
    z = g[:n] + 1j * g[n:]
    if size is None:
        return complex(z[0])
    return z.reshape(size)


def gaussian_q(x: float) -> float:
    """Upper tail of the standard normal, Q(x) = 0.5 * erfc(x / sqrt(2))."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


# Acklam's rational approximation to the standard normal quantile; absolute
# error < 1.2e-9 over (0,1), used only to seed Newton below.
_ACK_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
          1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ACK_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
          6.680131188771972e+01, -1.328068155288572e+01)
_ACK_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
          -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ACK_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
          3.754408661907416e+00)
_ACK_SPLIT = 0.02425


def _normal_quantile_seed(p: float) -> float:
    a, b, c, d = _ACK_A, _ACK_B, _ACK_C, _ACK_D
    if p < _ACK_SPLIT:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    if p > 1.0 - _ACK_SPLIT:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
                ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    q = p - 0.5
    r = q * q
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)


def gaussian_q_inv(eps: float) -> float:
    """Inverse of gaussian_q on (0, 1): x with Q(x) = eps.

    Rational seed polished by Newton steps on Q itself; converges to the
    evaluation accuracy of erfc (|Q(x) - eps| well below 1e-10 absolute,
    and below 1e-8 relative across the whole (1e-9, 1-1e-9) range).
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    # Q^{-1}(eps) = -Phi^{-1}(eps)
    x = -_normal_quantile_seed(eps)
    for _ in range(8):
        f = gaussian_q(x) - eps
        if f == 0.0:
            break
        pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        if pdf == 0.0:
            break
        step = f / pdf
        x += step
        if abs(f) <= 1e-13 * eps or abs(step) <= 1e-15 * max(1.0, abs(x)):
            break
    return x
