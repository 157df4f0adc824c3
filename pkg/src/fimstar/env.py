"""The decision process: state encoding, constrained action decoding, reward.

Each episode plays out on one random channel realization (a "task"); the
agent's flat action in [-1, 1]^dim is decoded into morph offsets, complex
beamformer columns, and a surface configuration, with hard projections so
that the power, morph-range, and energy-split constraints hold by
construction. Only the per-user SINR floors can fail, and that failure
flips the reward sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, FimGeometry, draw_realization, ris_grid
from .fbl import LinkBudget, RateReport, SolutionPoint, evaluate
from .numerics import PrngStream
from .star import project_feasible

__all__ = ["EnvConfig", "FimStarEnv", "decode_action", "state_dim", "action_dim"]

_TWO_PI = 2.0 * math.pi
_GAMMA_DB_CLIP = 40.0


@dataclass(frozen=True)
class EnvConfig:
    """Scenario dimensions, link budget, and episode bookkeeping."""

    p_y: int
    p_z: int
    f: int                      # surface element count
    n: int                      # users
    d: int                      # paths per link
    budget: LinkBudget
    x_max: float                # morph range, meters
    wavelength: float           # meters
    r_y: float                  # transmit-array spacing, meters
    r_z: float
    episode_len: int = 20
    redraw_per_episode: bool = True
    # log-distance path loss: L = l0 * (dist / d0) ** (-exponent) per link
    pathloss_l0: float = 1.0
    pathloss_d0: float = 1.0
    pathloss_exp: float = 2.2
    dist_bs_user: tuple = (1.0,)    # scalar-like or per-user
    dist_bs_ris: float = 1.0
    dist_ris_user: tuple = (1.0,)

    def __post_init__(self):
        if self.p_y * self.p_z < self.n:
            raise ValueError("element count P must be at least the user count N")
        if self.episode_len < 1:
            raise ValueError("episode_len must be >= 1")
        if self.budget.num_users != self.n:
            raise ValueError("link budget is sized for a different user count")
        object.__setattr__(self, "dist_bs_user", _per_user(self.dist_bs_user, self.n))
        object.__setattr__(self, "dist_ris_user", _per_user(self.dist_ris_user, self.n))

    @property
    def p(self) -> int:
        return self.p_y * self.p_z

    def pathloss(self, dist: float) -> float:
        return self.pathloss_l0 * (dist / self.pathloss_d0) ** (-self.pathloss_exp)

    def geometry(self, x=None) -> FimGeometry:
        x = np.zeros(self.p) if x is None else x
        return FimGeometry(self.p_y, self.p_z, self.r_y, self.r_z,
                           self.wavelength, x, self.x_max)


def _per_user(value, n: int) -> tuple:
    arr = np.asarray(value, dtype=float).ravel()
    if arr.size == 1:
        arr = np.full(n, arr[0])
    if arr.size != n:
        raise ValueError(f"need 1 or {n} distances, got {arr.size}")
    return tuple(arr)


def state_dim(cfg: EnvConfig) -> int:
    p, f, n = cfg.p, cfg.f, cfg.n
    return 2 * p * n + 2 * p * f + 2 * f * n + 2 * n


def action_dim(cfg: EnvConfig) -> int:
    return cfg.p + 2 * cfg.p * cfg.n + 4 * cfg.f


def decode_action(a, cfg: EnvConfig) -> SolutionPoint:
    """Map a flat action in [-1,1]^dim onto the feasible solution set.

    Layout: [x raws (P) | W re raws (PN) | W im raws (PN) | transmit-phase
    raws (F) | reflect-phase raws (F) | transmit-amp raws (F) | reflect-amp
    raws (F)]. Morph offsets and phases are affine maps of their raws; the
    beamformer is rescaled onto the power ball only when it overshoots; the
    surface amplitudes go through the energy-split projection.
    """
    a = np.asarray(a, dtype=float)
    if a.shape != (action_dim(cfg),):
        raise ValueError(f"action must have length {action_dim(cfg)}, got {a.shape}")
    p, f, n = cfg.p, cfg.f, cfg.n
    pn = p * n
    x = cfg.x_max * (a[:p] + 1.0) / 2.0
    w_re = a[p:p + pn].reshape(p, n)
    w_im = a[p + pn:p + 2 * pn].reshape(p, n)
    w = w_re + 1j * w_im
    total = float(np.sum(np.abs(w) ** 2))
    if total > cfg.budget.p_max:
        w = w * math.sqrt(cfg.budget.p_max / total)
    off = p + 2 * pn
    theta_t = _TWO_PI * (a[off:off + f] + 1.0) / 2.0
    theta_r = _TWO_PI * (a[off + f:off + 2 * f] + 1.0) / 2.0
    amp_t = a[off + 2 * f:off + 3 * f]
    amp_r = a[off + 3 * f:off + 4 * f]
    star = project_feasible(amp_t, amp_r, theta_t, theta_r)
    return SolutionPoint(x, w, star)


class FimStarEnv:
    """Fixed-length episodes over random channel realizations.

    One instance is single-user: never call step/reset concurrently. All
    randomness derives from the stream handed in, keyed by episode index,
    so (seed, action sequence) fully determines the trajectory.
    """

    def __init__(self, cfg: EnvConfig, stream: PrngStream):
        self.cfg = cfg
        self.stream = stream
        self.episode_index = 0   # next episode to start
        self._realization: ChannelRealization | None = None
        self._steps = 0
        self._ris = ris_grid(cfg.f, cfg.wavelength)
        self._loss_direct = np.array([cfg.pathloss(d) for d in cfg.dist_bs_user])
        self._loss_bs_ris = cfg.pathloss(cfg.dist_bs_ris)
        self._loss_ris_user = np.array([cfg.pathloss(d) for d in cfg.dist_ris_user])

    def reset(self) -> np.ndarray:
        cfg = self.cfg
        draw_label = self.episode_index if cfg.redraw_per_episode else 0
        self._realization = draw_realization(
            self.stream.substream(draw_label), cfg.geometry(), self._ris,
            cfg.n, cfg.d, self._loss_direct, self._loss_bs_ris, self._loss_ris_user,
        )
        self.episode_index += 1
        self._steps = 0
        _, _, state = self._evaluate(np.zeros(action_dim(cfg)))
        return state

    def step(self, action):
        if self._realization is None:
            raise RuntimeError("call reset() before step()")
        _, report, state = self._evaluate(action)
        magnitude = report.clamped_sum_rate()
        reward = magnitude if report.feasible else -magnitude
        self._steps += 1
        done = self._steps >= self.cfg.episode_len
        return state, reward, done

    def evaluate_action(self, action):
        """Decode and score an action without advancing the episode."""
        if self._realization is None:
            raise RuntimeError("call reset() before evaluating actions")
        solution, report, _ = self._evaluate(action)
        return solution, report

    def _evaluate(self, action):
        solution = decode_action(action, self.cfg)
        channels = self._realization.channel_set(solution.x)
        report = evaluate(solution, channels, self.cfg.budget, x_max=self.cfg.x_max)
        state = self._encode(channels, report)
        return solution, report, state

    def _encode(self, channels, report: RateReport) -> np.ndarray:
        # channel blocks are standardized by their configured path-loss scale
        t = channels.t / np.sqrt(self._loss_direct)[None, :]
        h = channels.h / math.sqrt(self._loss_bs_ris)
        k = channels.k / np.sqrt(self._loss_ris_user)[None, :]
        gamma_db = 10.0 * np.log10(np.maximum(report.gamma, 1e-30))
        gamma_db = np.clip(gamma_db, -_GAMMA_DB_CLIP, _GAMMA_DB_CLIP)
        return np.concatenate([
            t.real.ravel(), t.imag.ravel(),
            h.real.ravel(), h.imag.ravel(),
            k.real.ravel(), k.imag.ravel(),
            gamma_db, report.rate,
        ])
