"""Sharp Fourier multipliers: dyadic shells, modulation boxes, angular sectors, 1/Delta.

All cutoffs are indicator functions on the discrete lattice, so partition
identities hold to rounding.  Space-time fields are transformed with a cosine
(Tukey) taper in time; every quantity derived from a :class:`SpaceTimeField`
in frequency representation is therefore "as tapered".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from scipy.signal import windows

from .dirac_algebra import check_sign
from .errors import DomainError, RepresentationError
from .grid import (FREQUENCY, GridSpec, as_frequency, dyadic_of, from_fourier,
                   is_power_of_two)

SPACETIME = "position-time"


def _check_dyadic(N, name="N"):
    if not (float(N).is_integer() and is_power_of_two(int(N))):
        raise DomainError(f"{name} must be a dyadic number >= 1, got {N!r}")
    return int(N)


@dataclass(frozen=True)
class DyadicBox:
    """``K^s_{N,L} = {|xi| ~ N, |tau + s|xi|| ~ L}`` with sharp dyadic shells."""

    sign: int
    N: int
    L: int

    def __post_init__(self):
        check_sign(self.sign)
        object.__setattr__(self, "N", _check_dyadic(self.N, "N"))
        object.__setattr__(self, "L", _check_dyadic(self.L, "L"))


@dataclass(frozen=True)
class AngularSector:
    omega: tuple[float, float]
    gamma: float

    def __post_init__(self):
        w = np.asarray(self.omega, float)
        if abs(np.hypot(*w) - 1.0) > 1e-12:
            raise DomainError("sector direction must be a unit vector")
        if not 0 < self.gamma < np.pi:
            raise DomainError(f"aperture must lie in (0, pi), got {self.gamma!r}")
        object.__setattr__(self, "omega", (float(w[0]), float(w[1])))


# spatial multipliers ------------------------------------------------------

def _apply_spatial(f, mult: np.ndarray):
    """Multiply the spatial spectrum of ``f`` by ``mult`` and return ``f``'s type/rep."""
    if isinstance(f, SpaceTimeField):
        if f.rep != FREQUENCY:
            raise RepresentationError("space-time multipliers act on the transformed field")
        return f.with_values(f.values * mult)
    c = as_frequency(f)
    out = c.with_values(c.values * mult)
    return out if f.rep == FREQUENCY else from_fourier(out)


def shell_mask(grid: GridSpec, N: int) -> np.ndarray:
    return grid.dyadic_label == _check_dyadic(N)


def littlewood_paley(f, N: int):
    """Sharp projection onto the dyadic shell ``S_N`` (``S_1 = {|xi| < 2}``)."""
    return _apply_spatial(f, shell_mask(f.grid, N))


def dyadic_range(grid: GridSpec) -> list[int]:
    """Every shell that contains at least one lattice mode."""
    top = int(grid.dyadic_label.max())
    return [2**j for j in range(int(np.log2(top)) + 1)]


def signed_angle(omega, xi: np.ndarray) -> np.ndarray:
    """Angle from ``omega`` to ``xi`` in ``(-pi, pi]``; ``xi`` has shape ``(2, ...)``."""
    w1, w2 = omega
    return np.arctan2(w1 * xi[1] - w2 * xi[0], w1 * xi[0] + w2 * xi[1])


def sector_mask(grid: GridSpec, sector: AngularSector, sign: int = 1) -> np.ndarray:
    """Indicator of ``sign*xi`` in the half-open sector ``-gamma <= angle < gamma``.

    The zero mode is never included.
    """
    phi = signed_angle(sector.omega, sign * grid.xi)
    return (phi >= -sector.gamma) & (phi < sector.gamma) & (grid.xi_abs > 0)


def angular_sector_projection(f, sector: AngularSector, sign: int = 1):
    return _apply_spatial(f, sector_mask(f.grid, sector, sign))


def strip_mask(grid: GridSpec, omega, r: float) -> np.ndarray:
    """Indicator of ``T_r(omega) = {|P_{omega-perp} xi| <= r}``."""
    w1, w2 = omega
    return np.abs(-w2 * grid.xi[0] + w1 * grid.xi[1]) <= r


def omega_set(gamma: float) -> np.ndarray:
    """Maximal ``gamma``-separated set of equally spaced unit vectors, shape ``(m, 2)``.

    ``m = floor(2 pi / gamma)``: consecutive directions are at least ``gamma``
    apart and no further direction fits.
    """
    if not 0 < gamma < np.pi:
        raise DomainError(f"gamma must lie in (0, pi), got {gamma!r}")
    m = int(np.floor(2 * np.pi / gamma * (1 + 1e-12)))
    th = 2 * np.pi * np.arange(m) / m
    return np.stack([np.cos(th), np.sin(th)], axis=1)


def sector_cover_count(grid: GridSpec, gamma: float) -> np.ndarray:
    """``sum_{omega in Omega(gamma)} chi_{Gamma_gamma(omega)}`` on every lattice mode."""
    count = np.zeros(grid.shape, int)
    for w in omega_set(gamma):
        count += sector_mask(grid, AngularSector(tuple(w), gamma))
    return count


def inverse_laplacian_symbol(grid: GridSpec) -> np.ndarray:
    """``-1/|xi|^2`` with the zero mode annihilated."""
    r2 = grid.xi_abs**2
    return np.where(r2 > 0, -1.0 / np.where(r2 > 0, r2, 1.0), 0.0)


def inverse_laplacian(f):
    return _apply_spatial(f, inverse_laplacian_symbol(f.grid))


def laplacian(f):
    return _apply_spatial(f, -f.grid.xi_abs**2)


def partial(f, j: int):
    """Spectral derivative ``d/dx_j`` (``j`` = 1 or 2)."""
    return _apply_spatial(f, 1j * f.grid.xi[j - 1])


# space-time fields --------------------------------------------------------

@dataclass(frozen=True)
class SpaceTimeField:
    """Samples ``u(t_j, x)`` on ``grid.n_t`` uniform times in ``[t0, t1)``.

    ``values`` has shape ``(n_t, n, n)`` (scalar) or ``(n_t, 2, n, n)`` (spinor).
    In frequency representation the time axis holds Fourier coefficients at
    ``tau = 2 pi k / (t1 - t0)``, and ``taper`` records the time window that
    was applied before the transform.
    """

    grid: GridSpec
    values: np.ndarray
    rep: str = SPACETIME
    taper: tuple = ("none", 0.0)

    def __post_init__(self):
        if self.rep not in (SPACETIME, FREQUENCY):
            raise RepresentationError(f"unknown space-time representation {self.rep!r}")
        v = np.asarray(self.values, complex)
        g = self.grid
        if v.shape[0] != g.n_t or v.shape[-2:] != g.shape or v.ndim not in (3, 4):
            raise ValueError(f"space-time values shape {v.shape} does not match grid")
        object.__setattr__(self, "values", v)

    def with_values(self, values, rep=None, taper=None):
        return SpaceTimeField(self.grid, values, self.rep if rep is None else rep,
                              self.taper if taper is None else taper)

    @property
    def duration(self) -> float:
        t0, t1 = self.grid.t_span
        return t1 - t0

    @property
    def volume(self) -> float:
        return self.duration * self.grid.area

    @property
    def tau(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.grid.n_t, self.duration / self.grid.n_t)


def sample_times(grid: GridSpec) -> np.ndarray:
    t0, t1 = grid.t_span
    return t0 + (t1 - t0) * np.arange(grid.n_t) / grid.n_t


def time_window(n_t: int, taper=("tukey", 0.5)) -> np.ndarray:
    kind, p = taper
    if kind == "none":
        return np.ones(n_t)
    if kind == "tukey":
        return windows.tukey(n_t, p, sym=False)
    raise ValueError(f"unknown taper {kind!r}")


def space_time_transform(u: SpaceTimeField, taper=("tukey", 0.5)) -> SpaceTimeField:
    """Taper in time, then transform in ``(t, x)``; Parseval holds for the tapered field."""
    if u.rep != SPACETIME:
        raise RepresentationError("space_time_transform expects position-time samples")
    w = time_window(u.grid.n_t, taper)
    w = w.reshape((-1,) + (1,) * (u.values.ndim - 1))
    axes = (0, -2, -1)
    c = sfft.fftn(u.values * w, axes=axes, norm="forward")
    return u.with_values(c, FREQUENCY, tuple(taper))


def space_time_l2(u: SpaceTimeField) -> float:
    a = (np.abs(u.values) ** 2).sum()
    if u.rep == SPACETIME:
        a /= u.grid.n_t * u.grid.n**2
    return float(np.sqrt(u.volume * a))


def modulation_labels(u: SpaceTimeField, sign: int) -> tuple[np.ndarray, np.ndarray]:
    """Dyadic labels ``(N(xi), L(tau, xi))`` for the cone ``tau = -sign |xi|``."""
    check_sign(sign)
    r = u.grid.xi_abs
    h = np.abs(u.tau[:, None, None] + sign * r[None])
    return dyadic_of(r), dyadic_of(h)


def box_mask(u: SpaceTimeField, box: DyadicBox) -> np.ndarray:
    nl, ll = modulation_labels(u, box.sign)
    return (nl[None] == box.N) & (ll == box.L)


def modulation_projection(u: SpaceTimeField, box: DyadicBox) -> SpaceTimeField:
    if u.rep != FREQUENCY:
        raise RepresentationError("modulation_projection needs the space-time transform")
    m = box_mask(u, box)
    if u.values.ndim == 4:
        m = m[:, None]
    return u.with_values(u.values * m)


def dyadic_family(u: SpaceTimeField, sign: int) -> list[DyadicBox]:
    """All boxes ``K^sign_{N,L}`` that meet the space-time lattice."""
    nl, ll = modulation_labels(u, sign)
    ns = [2**j for j in range(int(np.log2(nl.max())) + 1)]
    ls = [2**j for j in range(int(np.log2(ll.max())) + 1)]
    return [DyadicBox(sign, N, L) for N in ns for L in ls]
