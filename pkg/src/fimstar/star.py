"""Transmitting/reflecting surface configuration and feasibility projection.

Each of the F cells splits its unit incident energy between a transmission
and a reflection coefficient (cell-wise single-connected architecture, so
both section matrices are diagonal): |omega_t|^2 + |omega_r|^2 = 1 per cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["StarConfig", "build_matrices", "project_feasible"]

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class StarConfig:
    """Per-cell phases (wrapped to [0, 2pi)) and transmission energy fraction."""

    theta_t: np.ndarray  # (F,) transmission phases
    theta_r: np.ndarray  # (F,) reflection phases
    beta: np.ndarray     # (F,) in [0, 1], share of energy transmitted

    def __post_init__(self):
        object.__setattr__(self, "theta_t", np.mod(np.asarray(self.theta_t, dtype=float), _TWO_PI))
        object.__setattr__(self, "theta_r", np.mod(np.asarray(self.theta_r, dtype=float), _TWO_PI))
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        f = len(self.beta)
        if self.theta_t.shape != (f,) or self.theta_r.shape != (f,):
            raise ValueError("phase and amplitude arrays must share length F")
        if np.any(self.beta < 0) or np.any(self.beta > 1):
            raise ValueError("beta must lie in [0, 1]")

    @property
    def f(self) -> int:
        return len(self.beta)


def build_matrices(cfg: StarConfig):
    """Diagonal section matrices (omega_t, omega_r), F x F each.

    Off-diagonals are exactly zero and the cell-wise energy split makes
    omega_t^H omega_t + omega_r^H omega_r the identity.
    """
    amp_t = np.sqrt(cfg.beta)
    amp_r = np.sqrt(1.0 - cfg.beta)
    omega_t = np.diag(amp_t * np.exp(1j * cfg.theta_t))
    omega_r = np.diag(amp_r * np.exp(1j * cfg.theta_r))
    return omega_t, omega_r


def project_feasible(raw_t, raw_r, raw_theta_t, raw_theta_r) -> StarConfig:
    """Map unconstrained raw values onto the feasible energy-split set.

    Amplitude pairs are normalized per cell, beta = a_t^2 / (a_t^2 + a_r^2),
    with a deterministic 0.5 tie-break when both raw amplitudes are zero;
    phases are wrapped to [0, 2pi). Total on all real inputs.
    """
    a_t = np.abs(np.asarray(raw_t, dtype=float))
    a_r = np.abs(np.asarray(raw_r, dtype=float))
    denom = a_t**2 + a_r**2
    beta = np.where(denom > 0, np.divide(a_t**2, denom, where=denom > 0), 0.5)
    return StarConfig(np.asarray(raw_theta_t, dtype=float),
                      np.asarray(raw_theta_r, dtype=float), beta)
