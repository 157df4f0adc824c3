"""Effective channels, SINR, short-packet achievable rate, and feasibility.

The per-user rate is the Shannon term minus a dispersion penalty that
scales with the inverse Gaussian tail of the target error probability and
shrinks with the square root of the blocklength. Rates can go negative at
low SINR; callers that need a physical quantity clamp at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .channel import ChannelSet
from .numerics import gaussian_q_inv
from .star import StarConfig, build_matrices

__all__ = [
    "LinkBudget",
    "RateReport",
    "SolutionPoint",
    "effective_channel",
    "sinr",
    "dispersion",
    "fbl_rate",
    "evaluate",
]

_LOG2E = math.log2(math.e)

# Feasibility slack for constraints enforced by floating-point projections.
_POWER_TOL = 1e-12
_SPLIT_TOL = 1e-9


@dataclass(frozen=True)
class LinkBudget:
    """Per-user noise/QoS targets plus the shared power and blocklength."""

    sigma2: np.ndarray     # (N,) noise power, watts
    eps: np.ndarray        # (N,) decoding error probability in (0,1)
    m_d: int               # blocklength, channel uses
    gamma_min: np.ndarray  # (N,) minimum SINR, linear scale
    p_max: float           # total transmit power bound, watts

    def __post_init__(self):
        object.__setattr__(self, "sigma2", np.asarray(self.sigma2, dtype=float))
        object.__setattr__(self, "eps", np.asarray(self.eps, dtype=float))
        object.__setattr__(self, "gamma_min", np.asarray(self.gamma_min, dtype=float))
        n = len(self.sigma2)
        if self.eps.shape != (n,) or self.gamma_min.shape != (n,):
            raise ValueError("per-user arrays must share length N")
        if np.any(self.sigma2 <= 0):
            raise ValueError("noise power must be positive")
        if np.any(self.eps <= 0) or np.any(self.eps >= 1):
            raise ValueError("error probabilities must lie in (0, 1)")
        if self.m_d < 1:
            raise ValueError("blocklength must be >= 1")
        if np.any(self.gamma_min < 0):
            raise ValueError("SINR floors must be >= 0")
        if self.p_max <= 0:
            raise ValueError("power budget must be positive")

    @property
    def num_users(self) -> int:
        return len(self.sigma2)


class SolutionPoint(NamedTuple):
    """One candidate: morph offsets, beamformer columns, surface config."""

    x: np.ndarray      # (P,)
    w: np.ndarray      # (P, N) complex, column per user
    star: StarConfig


@dataclass(frozen=True)
class RateReport:
    """Per-user SINR/rate evaluation of one candidate, with violations."""

    gamma: np.ndarray    # (N,) linear SINR
    rate: np.ndarray     # (N,) bits per channel use (raw, may be negative)
    sum_rate: float
    feasible: bool
    violations: tuple    # ((constraint-id, index), ...)

    def clamped_sum_rate(self) -> float:
        """Sum of per-user rates with negatives clamped to zero."""
        return float(np.maximum(self.rate, 0.0).sum())


def effective_channel(channels: ChannelSet, star, n: int) -> np.ndarray:
    """Composite direct + surface-assisted channel of user n, length P.

    ``star`` is the (omega_t, omega_r) matrix pair; the user's sector picks
    which section applies.
    """
    omega_t, omega_r = star
    omega = omega_t if channels.sector[n] == "transmit" else omega_r
    return channels.h @ omega.conj().T @ channels.k[:, n] + channels.t[:, n]


def sinr(channels: ChannelSet, star, w: np.ndarray, budget: LinkBudget) -> np.ndarray:
    """Per-user SINR under beamformer columns w, shape (N,)."""
    n = channels.num_users
    if w.shape != (channels.t.shape[0], n):
        raise ValueError(f"beamformer must be (P, N) = {channels.t.shape}, got {w.shape}")
    if np.any(budget.sigma2 <= 0):
        raise ValueError("noise power must be positive")
    v = np.column_stack([effective_channel(channels, star, i) for i in range(n)])
    cross = np.abs(v.conj().T @ w) ** 2          # [i, j] = |v_i^H w_j|^2
    signal = np.diag(cross)
    interference = cross.sum(axis=1) - signal
    return signal / (interference + budget.sigma2)


def dispersion(gamma: float) -> float:
    """Channel dispersion (log2 e)^2 * (1 - (1+gamma)^-2), in [0, (log2 e)^2)."""
    if gamma < 0:
        raise ValueError("SINR must be >= 0")
    return _LOG2E**2 * (1.0 - (1.0 + gamma) ** -2)


def fbl_rate(gamma: float, eps: float, m_d: int) -> float:
    """Short-packet achievable rate in bits per channel use.

    log2(1+gamma) minus the dispersion penalty; returns the raw value, which
    is negative when the penalty exceeds the Shannon term.
    """
    if m_d < 1:
        raise ValueError("blocklength must be >= 1")
    v = dispersion(gamma)
    return math.log2(1.0 + gamma) - gaussian_q_inv(eps) * math.sqrt(v / m_d)


def evaluate(solution: SolutionPoint, channels: ChannelSet, budget: LinkBudget,
             x_max: float | None = None) -> RateReport:
    """Rate/feasibility report for one candidate against one channel set.

    Checks, in order: per-user SINR floors ("sinr_min", user), the total
    power budget ("power", 0), morph offsets within [0, x_max] ("morph",
    element) when x_max is given, and the per-cell energy split of the
    surface ("energy_split", cell).
    """
    x, w, star_cfg = solution
    omega = build_matrices(star_cfg)
    gamma = sinr(channels, omega, w, budget)
    rate = np.array([
        fbl_rate(gamma[i], budget.eps[i], budget.m_d) for i in range(len(gamma))
    ])
    violations = []
    for i in np.nonzero(gamma < budget.gamma_min)[0]:
        violations.append(("sinr_min", int(i)))
    total_power = float(np.sum(np.abs(w) ** 2))
    if total_power > budget.p_max * (1.0 + _POWER_TOL):
        violations.append(("power", 0))
    if x_max is not None:
        x = np.asarray(x, dtype=float)
        for i in np.nonzero((x < 0) | (x > x_max))[0]:
            violations.append(("morph", int(i)))
    split = np.abs(np.diag(omega[0])) ** 2 + np.abs(np.diag(omega[1])) ** 2
    for i in np.nonzero(np.abs(split - 1.0) > _SPLIT_TOL)[0]:
        violations.append(("energy_split", int(i)))
    return RateReport(
        gamma=gamma,
        rate=rate,
        sum_rate=float(rate.sum()),
        feasible=not violations,
        violations=tuple(violations),
    )
