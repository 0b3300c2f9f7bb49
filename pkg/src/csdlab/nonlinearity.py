"""Dirac currents, the Coulomb-gauge nonlinearity and the gauge potential.

Sign table (fixed by the Gauss constraint, ``eps_{012} = eps^{012} = +1``,
metric ``(+,-,-)``)::

    J^mu = psi^dagger alpha^mu psi
    A_0  =  Delta^{-1} (d_1 J^2 - d_2 J^1)
    A_1  =  Delta^{-1} d_2 J^0
    A_2  = -Delta^{-1} d_1 J^0
    d_1 A_2 - d_2 A_1 = -J^0          (zero mode removed)

and the spinor equation reads ``i(d_t + alpha^j d_j) psi = m beta psi + NN psi``
with ``NN(psi, psi) = -(A_0 + A_j alpha^j) = -gamma^0 N(psi, psi)``.

Products are evaluated on a grid padded by 3/2 per axis and truncated back to
the computational lattice with the unpaired Nyquist modes dropped, so every
bilinear stage is an exact truncated convolution.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .dirac_algebra import ALPHA, GAMMA
from .errors import GridMismatchError, RepresentationError
from .grid import (FREQUENCY, POSITION, GridSpec, ScalarField, SpinorField,
                   as_frequency, l2_norm)


class Dealiaser:
    """Zero-padding between the ``n``-lattice and a ``3n/2`` product grid."""

    def __init__(self, grid: GridSpec, factor: float = 1.5):
        self.grid = grid
        self.m = int(np.ceil(factor * grid.n / 2)) * 2
        idx = grid.indices % self.m
        self._ix = (idx[:, None], idx[None, :])
        self.keep = ~grid.nyquist_mask

    def position(self, c: np.ndarray) -> np.ndarray:
        """Coefficients on the ``n``-lattice -> values on the padded grid."""
        p = np.zeros(c.shape[:-2] + (self.m, self.m), complex)
        p[(...,) + self._ix] = c * self.keep
        return sfft.ifft2(p, norm="forward")

    def coefficients(self, v: np.ndarray) -> np.ndarray:
        """Values on the padded grid -> truncated coefficients on the ``n``-lattice."""
        c = sfft.fft2(v, norm="forward")
        return c[(...,) + self._ix] * self.keep


@lru_cache(maxsize=16)
def dealiaser(grid: GridSpec) -> Dealiaser:
    return Dealiaser(grid)


def _inv_abs2(grid: GridSpec) -> np.ndarray:
    r2 = grid.xi_abs**2
    return np.where(r2 > 0, 1.0 / np.where(r2 > 0, r2, 1.0), 0.0)


def _coeffs(psi: SpinorField) -> np.ndarray:
    if psi.rep != POSITION:
        raise RepresentationError("expected a position-space spinor")
    return as_frequency(psi).values


def _check_grids(*fields):
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatchError("spinors live on different grids")
    return g


# coefficient-level kernels (used by the solvers) ---------------------------

def current_coefficients(p1: np.ndarray, p2: np.ndarray, D: Dealiaser) -> np.ndarray:
    """``J^mu`` coefficients, shape ``(3, n, n)``, from padded position values."""
    prod = np.einsum("axy,bxy->abxy", p1.conj(), p2)
    return D.coefficients(np.einsum("mab,abxy->mxy", ALPHA, prod))


def nn_coefficients(J: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Coefficients ``(a0, a1, a2)`` of ``NN = a0 I + a1 alpha^1 + a2 alpha^2``."""
    inv = _inv_abs2(grid)
    x1, x2 = grid.xi
    a = np.empty_like(J)
    a[0] = 1j * (x1 * J[2] - x2 * J[1]) * inv
    a[1] = 1j * x2 * J[0] * inv
    a[2] = -1j * x1 * J[0] * inv
    return a


def apply_nn(a_pos: np.ndarray, p3: np.ndarray) -> np.ndarray:
    """Pointwise ``(a0 I + a1 sigma1 + a2 sigma2) psi`` on padded values."""
    a0, a1, a2 = a_pos
    u, v = p3
    return np.stack([a0 * u + (a1 - 1j * a2) * v, (a1 + 1j * a2) * u + a0 * v])


def nonlinear_coefficients(c1, c2, c3, grid: GridSpec) -> np.ndarray:
    """Coefficients of ``NN(psi1, psi2) psi3`` from coefficient arrays."""
    D = dealiaser(grid)
    p1 = D.position(c1)
    p2 = p1 if c2 is c1 else D.position(c2)
    p3 = p2 if c3 is c2 else (p1 if c3 is c1 else D.position(c3))
    a = nn_coefficients(current_coefficients(p1, p2, D), grid)
    return D.coefficients(apply_nn(D.position(a), p3))


def cubic_coefficients(c: np.ndarray, grid: GridSpec) -> np.ndarray:
    """``NN(psi, psi) psi`` for a single spinor, sharing all transforms."""
    return nonlinear_coefficients(c, c, c, grid)


# public field-level API -----------------------------------------------------

@dataclass(frozen=True)
class GaugePotential:
    A0: ScalarField
    A1: ScalarField
    A2: ScalarField

    @property
    def grid(self) -> GridSpec:
        return self.A0.grid

    def divergence(self) -> ScalarField:
        g = self.grid
        c1 = as_frequency(self.A1).values
        c2 = as_frequency(self.A2).values
        return ScalarField(g, 1j * (g.xi[0] * c1 + g.xi[1] * c2), FREQUENCY)

    def curl(self) -> ScalarField:
        """``d_1 A_2 - d_2 A_1``."""
        g = self.grid
        c1 = as_frequency(self.A1).values
        c2 = as_frequency(self.A2).values
        return ScalarField(g, 1j * (g.xi[0] * c2 - g.xi[1] * c1), FREQUENCY)

    def max_imag(self) -> float:
        return max(float(np.abs(A.values.imag).max()) for A in (self.A0, self.A1, self.A2))

    def matrix(self) -> np.ndarray:
        """``-(A_0 I + A_1 alpha^1 + A_2 alpha^2)`` as a ``(2, 2, n, n)`` position field."""
        A = [a.values if a.rep == POSITION else sfft.ifft2(a.values, norm="forward")
             for a in (self.A0, self.A1, self.A2)]
        return -np.einsum("mab,mxy->abxy", ALPHA, np.stack(A))


def dirac_current(psi1: SpinorField, psi2: SpinorField, mu: int) -> ScalarField:
    """Pointwise ``psi1^dagger alpha^mu psi2`` on the computational grid."""
    g = _check_grids(psi1, psi2)
    if psi1.rep != POSITION or psi2.rep != POSITION:
        raise RepresentationError("dirac_current expects position-space spinors")
    v = np.einsum("axy,ab,bxy->xy", psi1.values.conj(), ALPHA[mu], psi2.values)
    return ScalarField(g, v)


def current_field(psi1: SpinorField, psi2: SpinorField) -> np.ndarray:
    """Dealiased current coefficients ``(3, n, n)`` for a pair of spinors."""
    g = _check_grids(psi1, psi2)
    D = dealiaser(g)
    return current_coefficients(D.position(_coeffs(psi1)), D.position(_coeffs(psi2)), D)


def gauge_potential(psi: SpinorField) -> GaugePotential:
    """Coulomb-gauge potential ``A_mu`` generated by ``psi`` (position space)."""
    g = psi.grid
    a = nn_coefficients(current_field(psi, psi), g)
    vals = sfft.ifft2(-a, norm="forward")
    return GaugePotential(*(ScalarField(g, v) for v in vals))


def nonlinear_matrix(psi1: SpinorField, psi2: SpinorField) -> np.ndarray:
    """``NN(psi1, psi2)`` as a ``(2, 2, n, n)`` position-space matrix field."""
    N1, N2 = split_N1_N2(psi1, psi2)
    return N1 + N2


def split_N1_N2(psi1: SpinorField, psi2: SpinorField) -> tuple[np.ndarray, np.ndarray]:
    """``NN = NN_1 + NN_2``: the ``eps_{0jk}`` (magnetic-current) part and the ``J^0`` part."""
    g = _check_grids(psi1, psi2)
    a = sfft.ifft2(nn_coefficients(current_field(psi1, psi2), g), norm="forward")
    N1 = np.einsum("ab,xy->abxy", ALPHA[0], a[0])
    N2 = np.einsum("ab,xy->abxy", ALPHA[1], a[1]) + np.einsum("ab,xy->abxy", ALPHA[2], a[2])
    return N1, N2


def nonlinear_term(psi1: SpinorField, psi2: SpinorField, psi3: SpinorField) -> SpinorField:
    """``NN(psi1, psi2) psi3`` in position space (alpha form)."""
    g = _check_grids(psi1, psi2, psi3)
    c = nonlinear_coefficients(_coeffs(psi1), _coeffs(psi2), _coeffs(psi3), g)
    return SpinorField(g, sfft.ifft2(c, norm="forward"))


def nonlinear_term_gamma_form(psi1: SpinorField, psi2: SpinorField, psi3: SpinorField) -> SpinorField:
    """``-gamma^0 N(psi1, psi2) psi3`` built from the gamma-matrix expression.

    ``N = Delta^{-1}(gamma^0 [d_1 J^2 - d_2 J^1] + gamma^1 d_2 J^0 - gamma^2 d_1 J^0)``
    with ``J^mu = psibar gamma^mu psi``.  Independent of the alpha-form code path.
    """
    g = _check_grids(psi1, psi2, psi3)
    D = dealiaser(g)
    p1, p2, p3 = (D.position(_coeffs(p)) for p in (psi1, psi2, psi3))
    bar = np.einsum("axy,ab->bxy", p1.conj(), GAMMA[0])
    J = D.coefficients(np.einsum("axy,mab,bxy->mxy", bar, GAMMA, p2))
    lap = -_inv_abs2(g)
    x1, x2 = g.xi
    d1, d2 = 1j * x1, 1j * x2
    s0 = lap * (d1 * J[2] - d2 * J[1])
    s1 = lap * d2 * J[0]
    s2 = -lap * d1 * J[0]
    N = (np.einsum("ab,xy->abxy", GAMMA[0], D.position(s0))
         + np.einsum("ab,xy->abxy", GAMMA[1], D.position(s1))
         + np.einsum("ab,xy->abxy", GAMMA[2], D.position(s2)))
    out = -np.einsum("ab,bcxy,cxy->axy", GAMMA[0], N, p3)
    return SpinorField(g, sfft.ifft2(D.coefficients(out), norm="forward"))


def cs_gauss_residual(psi: SpinorField, A: GaugePotential) -> float:
    """``||d_1 A_2 - d_2 A_1 + J^0||_{L2}`` with the mean of ``J^0`` removed."""
    J0 = current_field(psi, psi)[0].copy()
    J0[0, 0] = 0.0
    r = as_frequency(A.curl()).values + J0
    return l2_norm(ScalarField(psi.grid, r, FREQUENCY))


def meanfree_charge_density_norm(psi: SpinorField) -> float:
    J0 = current_field(psi, psi)[0].copy()
    J0[0, 0] = 0.0
    return l2_norm(ScalarField(psi.grid, J0, FREQUENCY))
