"""Element geometry, steering vectors, and multipath channel realizations.

The transmit array is a planar y-z grid whose elements can be displaced
along x (the morph vector). All three links (array->user, array->surface,
surface->user) are sums of D random plane-wave paths with i.i.d. complex
Gaussian gains whose per-path variances add up to the link path loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .numerics import PrngStream, sample_cgauss

__all__ = [
    "FimGeometry",
    "PathSet",
    "ChannelSet",
    "ChannelRealization",
    "element_positions",
    "steering",
    "draw_paths",
    "direct_channel",
    "bs_ris_channel",
    "ris_user_channel",
    "ris_grid",
    "near_square",
    "draw_realization",
]


@dataclass(frozen=True)
class FimGeometry:
    """Planar grid of p_y * p_z elements with per-element morph offsets x."""

    p_y: int
    p_z: int
    r_y: float          # inter-element spacing along y, meters
    r_z: float          # inter-element spacing along z, meters
    wavelength: float   # carrier wavelength, meters
    x: np.ndarray       # morph offsets, meters, shape (P,)
    x_max: float        # morph range bound, meters

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        if self.p_y < 1 or self.p_z < 1:
            raise ValueError("grid counts must be positive")
        if self.wavelength <= 0 or self.r_y < 0 or self.r_z < 0:
            raise ValueError("bad spacing/wavelength")
        if self.x.shape != (self.p,):
            raise ValueError(f"x must have length P={self.p}, got {self.x.shape}")
        if self.x_max < 0:
            raise ValueError("x_max must be >= 0")
        if np.any(self.x < 0) or np.any(self.x > self.x_max):
            raise ValueError("morph offsets must lie in [0, x_max]")

    @property
    def p(self) -> int:
        return self.p_y * self.p_z

    def with_morph(self, x) -> "FimGeometry":
        return replace(self, x=np.asarray(x, dtype=float))


@dataclass(frozen=True)
class PathSet:
    """One multipath draw: D complex gains plus per-path angles.

    total_power records the sum of the configured per-path gain variances,
    i.e. the link path loss the draw was calibrated to.
    """

    gains: np.ndarray       # complex, shape (D,)
    elevations: np.ndarray  # radians in [0, pi), shape (D,)
    azimuths: np.ndarray    # radians in [0, pi), shape (D,)
    total_power: float

    def __post_init__(self):
        object.__setattr__(self, "gains", np.asarray(self.gains, dtype=complex))
        object.__setattr__(self, "elevations", np.asarray(self.elevations, dtype=float))
        object.__setattr__(self, "azimuths", np.asarray(self.azimuths, dtype=float))
        if self.d < 1:
            raise ValueError("need at least one path")
        if self.elevations.shape != (self.d,) or self.azimuths.shape != (self.d,):
            raise ValueError("angle arrays must match the gain count")
        for angles in (self.elevations, self.azimuths):
            if np.any(angles < 0) or np.any(angles >= math.pi):
                raise ValueError("angles must lie in [0, pi)")
        if self.total_power <= 0:
            raise ValueError("total_power must be positive")

    @property
    def d(self) -> int:
        return len(self.gains)


@dataclass(frozen=True)
class ChannelSet:
    """Channel matrices for one realization evaluated at one morph vector.

    t: (P, N) direct array->user columns; h: (P, F) array->surface matrix;
    k: (F, N) surface->user columns; sector: length-N array of "transmit"
    or "reflect" labels splitting the users across the two surface sides.
    """

    t: np.ndarray
    h: np.ndarray
    k: np.ndarray
    sector: tuple

    def __post_init__(self):
        object.__setattr__(self, "t", np.asarray(self.t, dtype=complex))
        object.__setattr__(self, "h", np.asarray(self.h, dtype=complex))
        object.__setattr__(self, "k", np.asarray(self.k, dtype=complex))
        object.__setattr__(self, "sector", tuple(self.sector))
        p, n = self.t.shape
        if self.h.shape[0] != p:
            raise ValueError("t and h disagree on the element count P")
        f = self.h.shape[1]
        if self.k.shape != (f, n):
            raise ValueError(f"k must be ({f}, {n}), got {self.k.shape}")
        if len(self.sector) != n:
            raise ValueError("one sector label per user required")
        if any(s not in ("transmit", "reflect") for s in self.sector):
            raise ValueError("sector labels must be 'transmit' or 'reflect'")

    @property
    def num_users(self) -> int:
        return self.t.shape[1]


def element_positions(geom: FimGeometry) -> np.ndarray:
    """(P, 3) array of element positions (x_p, y_p, z_p), row-major over y."""
    idx = np.arange(geom.p)
    y = geom.r_y * (idx % geom.p_y)
    z = geom.r_z * (idx // geom.p_y)
    return np.column_stack([geom.x, y, z])


def steering(geom: FimGeometry, azimuth: float, elevation: float) -> np.ndarray:
    """Unit-modulus array response toward (azimuth, elevation) in [0, pi).

    Entry p is exp(j*2*pi/lambda * (x_p sin(el) cos(az) + y_p sin(el) sin(az)
    + z_p cos(el))); the reference element follows the same formula.
    """
    pos = element_positions(geom)
    direction = np.array([
        math.sin(elevation) * math.cos(azimuth),
        math.sin(elevation) * math.sin(azimuth),
        math.cos(elevation),
    ])
    phase = (2.0 * math.pi / geom.wavelength) * (pos @ direction)
    return np.exp(1j * phase)


def draw_paths(rng: PrngStream, d: int, total_power: float) -> PathSet:
    """Draw D paths with equal per-path variance total_power / D.

    Gains are complex Gaussian, angles uniform on [0, pi). Pure in the
    stream: the same PrngStream always yields the same PathSet.
    """
    if d < 1:
        raise ValueError("path count must be >= 1")
    if total_power <= 0:
        raise ValueError("total_power must be positive")
    gen = rng.generator()
    gains = sample_cgauss(gen, total_power / d, size=d)
    elevations = gen.uniform(0.0, math.pi, size=d)
    azimuths = gen.uniform(0.0, math.pi, size=d)
    return PathSet(gains, elevations, azimuths, total_power)


def _path_sum(geom: FimGeometry, paths: PathSet) -> np.ndarray:
    pos = element_positions(geom)
    el, az = paths.elevations, paths.azimuths
    directions = np.column_stack([
        np.sin(el) * np.cos(az),
        np.sin(el) * np.sin(az),
        np.cos(el),
    ])  # (D, 3)
    phases = (2.0 * math.pi / geom.wavelength) * (pos @ directions.T)  # (P, D)
    return np.exp(1j * phases) @ paths.gains


def direct_channel(geom: FimGeometry, paths: PathSet) -> np.ndarray:
    """Array->user channel vector: sum_d gain_d * steering(angles_d)."""
    return _path_sum(geom, paths)


def bs_ris_channel(geom: FimGeometry, per_column_paths) -> np.ndarray:
    """(P, F) array->surface matrix; column f has its own PathSet."""
    if len(per_column_paths) < 1:
        raise ValueError("need at least one surface element")
    return np.column_stack([_path_sum(geom, ps) for ps in per_column_paths])


def ris_user_channel(ris_geom: FimGeometry, paths: PathSet) -> np.ndarray:
    """Surface->user channel on the surface's own fixed grid (no morphing)."""
    if np.any(ris_geom.x != 0):
        raise ValueError("the surface grid has no morph offsets")
    return _path_sum(ris_geom, paths)


def ris_grid(f: int, wavelength: float) -> FimGeometry:
    """Near-square half-wavelength grid with F elements and x fixed at zero."""
    f_y, f_z = near_square(f)
    return FimGeometry(
        p_y=f_y, p_z=f_z, r_y=wavelength / 2, r_z=wavelength / 2,
        wavelength=wavelength, x=np.zeros(f), x_max=0.0,
    )


def near_square(count: int):
    """Factor count into (cols, rows) with cols the largest divisor <= sqrt."""
    if count < 1:
        raise ValueError("count must be positive")
    best = 1
    for cand in range(1, int(math.isqrt(count)) + 1):
        if count % cand == 0:
            best = cand
    return best, count // best


@dataclass(frozen=True)
class ChannelRealization:
    """Path-level draw for all links; channels are re-evaluated per morph.

    The array->user and array->surface channels depend on the morph vector,
    so only the path sets are frozen here; ``channel_set(x)`` produces the
    matrices for a candidate x. The surface->user link lives on the fixed
    surface grid and never changes with x.
    """

    geom: FimGeometry
    ris: FimGeometry
    direct_paths: tuple       # N PathSets
    bs_ris_paths: tuple       # F PathSets
    ris_user_paths: tuple     # N PathSets
    sector: tuple

    def channel_set(self, x) -> ChannelSet:
        morphed = self.geom.with_morph(x)
        t = np.column_stack([direct_channel(morphed, ps) for ps in self.direct_paths])
        h = bs_ris_channel(morphed, self.bs_ris_paths)
        k = np.column_stack([ris_user_channel(self.ris, ps) for ps in self.ris_user_paths])
        return ChannelSet(t, h, k, self.sector)


def draw_realization(
    rng: PrngStream,
    geom: FimGeometry,
    ris: FimGeometry,
    num_users: int,
    num_paths: int,
    loss_direct,
    loss_bs_ris: float,
    loss_ris_user,
    sector=None,
) -> ChannelRealization:
    """Draw all path sets for one scenario realization.

    loss_direct / loss_ris_user may be scalars or per-user arrays; every
    column of the array->surface matrix uses loss_bs_ris. Users default to
    an even sector split (first half transmit, rest reflect).
    """
    loss_direct = np.broadcast_to(np.asarray(loss_direct, dtype=float), (num_users,))
    loss_ris_user = np.broadcast_to(np.asarray(loss_ris_user, dtype=float), (num_users,))
    if sector is None:
        n_t = (num_users + 1) // 2
        sector = ("transmit",) * n_t + ("reflect",) * (num_users - n_t)
    f = ris.p
    direct = tuple(
        draw_paths(rng.substream(n), num_paths, loss_direct[n]) for n in range(num_users)
    )
    bs_ris = tuple(
        draw_paths(rng.substream(num_users + col), num_paths, loss_bs_ris) for col in range(f)
    )
    ris_user = tuple(
        draw_paths(rng.substream(num_users + f + n), num_paths, loss_ris_user[n])
        for n in range(num_users)
    )
    return ChannelRealization(geom, ris, direct, bs_ris, ris_user, tuple(sector))
