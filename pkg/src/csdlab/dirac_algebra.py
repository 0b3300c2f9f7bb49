"""2x2 Dirac matrices, Dirac projections and modified Riesz symbols.

Conventions: ``beta = sigma3``, ``alpha0 = I``, ``alpha1 = sigma1``,
``alpha2 = sigma2``; the gamma matrices are ``gamma0 = sigma3``,
``gamma1 = i sigma2``, ``gamma2 = -i sigma1`` so that ``alpha^j = gamma0 gamma^j``.

The Dirac projection ``Pi_s(xi) = (I + s xi.alpha/|xi|)/2`` projects onto the
``s``-eigenspace of ``xi.alpha/|xi|``.  Since it is the Bloch projector along
the unit vector ``s xi/|xi|``,

    ||Pi_s1(xi1) Pi_s2(xi2)|| = cos(angle(s1 xi1, s2 xi2)/2)
                              = sin(angle(s1 xi1, -s2 xi2)/2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .grid import FREQUENCY, SpinorField, as_frequency, from_fourier

I2 = np.eye(2, dtype=complex)
SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class DiracMatrices:
    alpha0: np.ndarray = I2
    alpha1: np.ndarray = SIGMA1
    alpha2: np.ndarray = SIGMA2
    beta: np.ndarray = SIGMA3

    @property
    def alpha(self) -> np.ndarray:
        """``alpha^mu`` stacked, shape ``(3, 2, 2)``."""
        return np.stack([self.alpha0, self.alpha1, self.alpha2])

    @property
    def gamma(self) -> np.ndarray:
        return np.stack([self.beta, 1j * SIGMA2, -1j * SIGMA1])


DIRAC = DiracMatrices()
ALPHA = DIRAC.alpha
GAMMA = DIRAC.gamma
BETA = DIRAC.beta

SIGNS = (1, -1)


def check_sign(s: int) -> int:
    if s not in SIGNS:
        raise ValueError(f"sign must be +1 or -1, got {s!r}")
    return int(s)


def _unit(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    r = np.hypot(xi[..., 0], xi[..., 1])
    if np.any(r == 0):
        raise DomainError("the symbol is undefined at xi = 0")
    return xi / r[..., None]


def alpha_dot(v) -> np.ndarray:
    """``v_1 alpha^1 + v_2 alpha^2`` for ``v`` of shape ``(..., 2)``."""
    v = np.asarray(v)
    return v[..., 0, None, None] * SIGMA1 + v[..., 1, None, None] * SIGMA2


def projection_symbol(s: int, xi) -> np.ndarray:
    """``Pi_s(xi)``; ``xi`` may be batched with shape ``(..., 2)``."""
    s = check_sign(s)
    return 0.5 * (I2 + s * alpha_dot(_unit(xi)))


def riesz_symbol(s: int, mu: int, xi):
    """Symbol of the modified Riesz transform: ``-1`` for ``mu = 0``, ``-s xi_mu/|xi|`` otherwise."""
    s = check_sign(s)
    if mu == 0:
        xi = np.asarray(xi, dtype=float)
        return -np.ones(xi.shape[:-1]) if xi.ndim > 1 else -1.0
    if mu not in (1, 2):
        raise ValueError(f"mu must be 0, 1 or 2, got {mu!r}")
    u = _unit(xi)
    return -s * u[..., mu - 1]


def angle(u, v) -> np.ndarray:
    """Unsigned angle in ``[0, pi]`` between 2-vectors, via ``atan2(|cross|, dot)``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    cross = u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
    dot = u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1]
    return np.arctan2(np.abs(cross), dot)


def null_angle(s1: int, xi1, s2: int, xi2) -> np.ndarray:
    """``angle(s1 xi1, -s2 xi2)``: the angle that controls ``Pi_s1(xi1) Pi_s2(xi2)``."""
    return angle(s1 * np.asarray(xi1, float), -s2 * np.asarray(xi2, float))


def projection_product_norm(s1: int, xi1, s2: int, xi2):
    """Operator norm of ``Pi_s1(xi1) Pi_s2(xi2)``, from the closed form."""
    _unit(xi1), _unit(xi2)
    return np.sin(0.5 * null_angle(check_sign(s1), xi1, check_sign(s2), xi2))


def projection_product_norm_svd(s1: int, xi1, s2: int, xi2):
    """Same quantity by brute-force singular values (reference oracle)."""
    m = projection_symbol(s1, xi1) @ projection_symbol(s2, xi2)
    return np.linalg.svd(m, compute_uv=False)[..., 0]


def projection_multiplier(s: int, grid) -> np.ndarray:
    """``Pi_s`` on every lattice mode, shape ``(2, 2, n, n)``; ``Pi_s(0) = I/2``."""
    s = check_sign(s)
    r = grid.xi_abs
    safe = np.where(r > 0, r, 1.0)
    u1 = np.where(r > 0, grid.xi[0] / safe, 0.0)
    u2 = np.where(r > 0, grid.xi[1] / safe, 0.0)
    m = np.empty((2, 2, *grid.shape), complex)
    m[0, 0] = m[1, 1] = 0.5
    m[0, 1] = 0.5 * s * (u1 - 1j * u2)
    m[1, 0] = 0.5 * s * (u1 + 1j * u2)
    return m


def apply_matrix_multiplier(m: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Mode-wise product of a ``(2, 2, n, n)`` symbol with ``(2, n, n)`` coefficients."""
    return np.einsum("ab...,b...->a...", m, c)


def project_field(s: int, psi: SpinorField) -> SpinorField:
    """Apply ``Pi_s(-i grad)``; returns a field in the representation of ``psi``."""
    c = as_frequency(psi)
    out = c.with_values(apply_matrix_multiplier(projection_multiplier(s, psi.grid), c.values))
    return out if psi.rep == FREQUENCY else from_fourier(out)


# identities -----------------------------------------------------------------

def commutator_residual(s: int, i: int, xi) -> np.ndarray:
    """Max abs entry of ``alpha^i Pi_s - Pi_{-s} alpha^i - s (xi^i/|xi|) I``."""
    a = ALPHA[i]
    u = _unit(xi)
    lhs = a @ projection_symbol(s, xi)
    rhs = projection_symbol(-s, xi) @ a + s * u[..., i - 1, None, None] * I2
    return np.abs(lhs - rhs).max(axis=(-2, -1))


def riesz_identity_residual(s: int, mu: int, xi) -> np.ndarray:
    """Max abs entry of ``alpha^mu Pi_s - (Pi_{-s} alpha^mu Pi_s - R^mu_s Pi_s)``."""
    p = projection_symbol(s, xi)
    pm = projection_symbol(-s, xi)
    a = ALPHA[mu]
    r = np.asarray(riesz_symbol(s, mu, xi))[..., None, None]
    return np.abs(a @ p - (pm @ a @ p - r * p)).max(axis=(-2, -1))


def algebra_residuals() -> dict[str, float]:
    """Exact structural identities of the constant matrices (all should be 0)."""
    out = {}
    b = BETA
    for j in (1, 2):
        out[f"beta_alpha{j}_anticommute"] = np.abs(b @ ALPHA[j] + ALPHA[j] @ b).max()
    for i in (1, 2):
        for j in (1, 2):
            ac = 0.5 * (ALPHA[i] @ ALPHA[j] + ALPHA[j] @ ALPHA[i])
            out[f"alpha{i}{j}_clifford"] = np.abs(ac - (i == j) * I2).max()
    for name, m in (("alpha0", ALPHA[0]), ("alpha1", ALPHA[1]), ("alpha2", ALPHA[2]), ("beta", b)):
        out[f"{name}_hermitian"] = np.abs(m - m.conj().T).max()
    eta = np.diag([1.0, -1.0, -1.0])
    for mu in range(3):
        for nu in range(3):
            ac = 0.5 * (GAMMA[mu] @ GAMMA[nu] + GAMMA[nu] @ GAMMA[mu])
            out[f"gamma{mu}{nu}_clifford"] = np.abs(ac - eta[mu, nu] * I2).max()
    for j in (1, 2):
        out[f"alpha{j}_is_gamma0_gamma{j}"] = np.abs(GAMMA[0] @ GAMMA[j] - ALPHA[j]).max()
    return {k: float(v) for k, v in out.items()}


def projection_residuals(xi) -> dict[str, float]:
    """Idempotence, completeness, orthogonality and hermiticity of ``Pi_s(xi)`` on a batch."""
    pp, pm = projection_symbol(1, xi), projection_symbol(-1, xi)
    h = lambda m: np.swapaxes(m.conj(), -1, -2)
    return {
        "idempotent_plus": float(np.abs(pp @ pp - pp).max()),
        "idempotent_minus": float(np.abs(pm @ pm - pm).max()),
        "complete": float(np.abs(pp + pm - I2).max()),
        "orthogonal": float(max(np.abs(pp @ pm).max(), np.abs(pm @ pp).max())),
        "hermitian": float(max(np.abs(pp - h(pp)).max(), np.abs(pm - h(pm)).max())),
    }
