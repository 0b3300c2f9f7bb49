"""Periodic lattice, spectral transforms and Sobolev norms.

The continuum plane is replaced by the periodic box ``[-L, L)^2`` sampled on
``n x n`` points.  Fields in the *frequency* representation store Fourier
series coefficients, ``f(x) = sum_k c_k exp(i xi_k . x)`` with
``xi_k = (pi / L) k`` and ``k`` in ``[-n/2, n/2)^2`` (FFT ordering), so the
forward transform carries the ``1/n^2`` factor.  L2 norms are the torus
integrals ``int |f|^2 dx``; in frequency space this is ``(2L)^2 sum |c_k|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import GridMismatchError, RepresentationError

POSITION = "position"
FREQUENCY = "frequency"
_REPS = (POSITION, FREQUENCY)


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Square periodic lattice with optional time sampling."""

    n: int
    dom_half_width: float
    n_t: int = 2
    t_span: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or not is_power_of_two(int(self.n)) or self.n < 8:
            raise ValueError(f"n must be a power of two >= 8, got {self.n!r}")
        if not self.dom_half_width > 0:
            raise ValueError(f"dom_half_width must be positive, got {self.dom_half_width!r}")
        if self.n_t < 2:
            raise ValueError(f"n_t must be >= 2, got {self.n_t!r}")
        t0, t1 = self.t_span
        if not t1 > t0:
            raise ValueError(f"t_span must be increasing, got {self.t_span!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "dom_half_width", float(self.dom_half_width))
        object.__setattr__(self, "t_span", (float(t0), float(t1)))

    @classmethod
    def with_spacing(cls, n: int, dxi: float, **kw) -> "GridSpec":
        """Grid whose frequency lattice has spacing ``dxi``."""
        return cls(n, np.pi / dxi, **kw)

    @property
    def dx(self) -> float:
        return 2.0 * self.dom_half_width / self.n

    @property
    def dxi(self) -> float:
        return np.pi / self.dom_half_width

    @property
    def area(self) -> float:
        return (2.0 * self.dom_half_width) ** 2

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @cached_property
    def indices(self) -> np.ndarray:
        """Integer lattice indices ``k`` in FFT order, ``[-n/2, n/2)``."""
        return np.fft.fftfreq(self.n, 1.0 / self.n).round().astype(np.int64)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return self.indices * self.dxi

    @cached_property
    def xi(self) -> np.ndarray:
        """Frequency lattice as an array of shape ``(2, n, n)``."""
        k = self.wavenumbers
        return np.stack(np.meshgrid(k, k, indexing="ij"))

    @cached_property
    def xi_abs(self) -> np.ndarray:
        return np.hypot(self.xi[0], self.xi[1])

    @cached_property
    def x(self) -> np.ndarray:
        """Position lattice ``x_j = -L + j dx`` as shape ``(2, n, n)``."""
        g = -self.dom_half_width + self.dx * np.arange(self.n)
        return np.stack(np.meshgrid(g, g, indexing="ij"))

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on modes with a component at the unpaired index ``-n/2``."""
        ny = self.indices == -(self.n // 2)
        return ny[:, None] | ny[None, :]

    @cached_property
    def dyadic_label(self) -> np.ndarray:
        """Dyadic size ``N`` of each mode: 1 on ``|xi| < 2``, else ``2^floor(log2|xi|)``."""
        return dyadic_of(self.xi_abs)

    def frequency_of_index(self, k1: int, k2: int) -> tuple[float, float]:
        h = self.n // 2
        if not (-h <= k1 < h and -h <= k2 < h):
            raise IndexError(f"lattice index ({k1}, {k2}) outside [-{h}, {h})")
        return (k1 * self.dxi, k2 * self.dxi)

    def index_of_frequency(self, xi1: float, xi2: float) -> tuple[int, int]:
        k1, k2 = xi1 / self.dxi, xi2 / self.dxi
        r1, r2 = int(round(k1)), int(round(k2))
        if abs(k1 - r1) > 1e-9 or abs(k2 - r2) > 1e-9:
            raise ValueError(f"({xi1}, {xi2}) is not on the frequency lattice")
        self.frequency_of_index(r1, r2)
        return (r1, r2)

    def array_index(self, k1: int, k2: int) -> tuple[int, int]:
        """Position of lattice index ``(k1, k2)`` inside an FFT-ordered array."""
        return (k1 % self.n, k2 % self.n)


def dyadic_of(r: np.ndarray) -> np.ndarray:
    """Inhomogeneous dyadic label of radii ``r`` (exact at powers of two)."""
    r = np.asarray(r, dtype=float)
    _, e = np.frexp(r)
    label = np.ldexp(1.0, e - 1)
    return np.where(r < 2.0, 1.0, label)


def _check_rep(rep: str):
    if rep not in _REPS:
        raise RepresentationError(f"unknown representation {rep!r}")


@dataclass(frozen=True)
class ScalarField:
    grid: GridSpec
    values: np.ndarray
    rep: str = POSITION

    def __post_init__(self):
        _check_rep(self.rep)
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise GridMismatchError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", v)

    def with_values(self, values, rep=None) -> "ScalarField":
        return ScalarField(self.grid, values, self.rep if rep is None else rep)

    def __add__(self, other):
        _same(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        _same(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, c):
        return self.with_values(self.values * c)

    __rmul__ = __mul__


@dataclass(frozen=True)
class SpinorField:
    """Two-component complex field; ``values`` has shape ``(2, n, n)``."""

    grid: GridSpec
    values: np.ndarray
    rep: str = POSITION

    def __post_init__(self):
        _check_rep(self.rep)
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (2, *self.grid.shape):
            raise GridMismatchError(f"spinor values shape {v.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_components(cls, a: ScalarField, b: ScalarField) -> "SpinorField":
        _same(a, b)
        return cls(a.grid, np.stack([a.values, b.values]), a.rep)

    @classmethod
    def zeros(cls, grid: GridSpec, rep: str = POSITION) -> "SpinorField":
        return cls(grid, np.zeros((2, grid.n, grid.n), complex), rep)

    @property
    def components(self) -> tuple[ScalarField, ScalarField]:
        return (ScalarField(self.grid, self.values[0], self.rep),
                ScalarField(self.grid, self.values[1], self.rep))

    def with_values(self, values, rep=None) -> "SpinorField":
        return SpinorField(self.grid, values, self.rep if rep is None else rep)

    def __add__(self, other):
        _same(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        _same(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, c):
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)


Field = ScalarField | SpinorField


def _same(a, b):
    if a.grid != b.grid:
        raise GridMismatchError("fields live on different grids")
    if a.rep != b.rep:
        raise RepresentationError(f"representations differ: {a.rep} vs {b.rep}")


def to_fourier(f: Field) -> Field:
    if f.rep != POSITION:
        raise RepresentationError("to_fourier expects a position-space field")
    return f.with_values(sfft.fft2(f.values, norm="forward"), FREQUENCY)


def from_fourier(f: Field) -> Field:
    if f.rep != FREQUENCY:
        raise RepresentationError("from_fourier expects a frequency-space field")
    return f.with_values(sfft.ifft2(f.values, norm="forward"), POSITION)


def as_frequency(f: Field) -> Field:
    return f if f.rep == FREQUENCY else to_fourier(f)


def as_position(f: Field) -> Field:
    return f if f.rep == POSITION else from_fourier(f)


def l2_norm(f: Field) -> float:
    """Torus L2 norm, computed in whichever representation ``f`` is held."""
    a = np.abs(f.values) ** 2
    if f.rep == POSITION:
        return float(np.sqrt(f.grid.area * a.sum() / f.grid.n**2))
    return float(np.sqrt(f.grid.area * a.sum()))


def charge(psi: SpinorField) -> float:
    """Conserved charge ``Q = int |psi|^2 dx``."""
    return l2_norm(psi) ** 2


def sobolev_weights(grid: GridSpec, s: float) -> np.ndarray:
    """Per-mode weights ``N^{2s}`` of the dyadic H^s norm."""
    if s == 0:
        return np.ones(grid.shape)
    return grid.dyadic_label ** (2.0 * s)


def sobolev_norm(psi: Field, s: float) -> float:
    """Dyadic H^s norm ``(sum_N N^{2s} ||P_N psi||^2)^{1/2}``.

    Shells are the sharp sets used by :func:`csdlab.multipliers.littlewood_paley`,
    so ``s = 0`` is exactly the L2 norm.
    """
    c = as_frequency(psi).values
    w = sobolev_weights(psi.grid, s)
    mass = (np.abs(c) ** 2 * w).sum()
    return float(np.sqrt(psi.grid.area * mass))


def top_shell_fraction(psi: Field) -> float:
    """Fraction of L2 mass in the outermost dyadic shell resolved by the grid."""
    c = as_frequency(psi).values
    lab = psi.grid.dyadic_label
    m = np.abs(c) ** 2
    if c.ndim == 3:
        m = m.sum(axis=0)
    tot = m.sum()
    return float(m[lab == lab.max()].sum() / tot) if tot > 0 else 0.0
