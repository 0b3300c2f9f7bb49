"""Box-data experiment for the failure of a cubic H^s estimate when s < 0.

Data: ``phi = (F^{-1} chi_{R+}, F^{-1} chi_{R-})`` with ``R+-`` the squares of
half-width ``mu = lam^(1-eps)`` centred at ``(+-lam, 0)``.  For this data we
evaluate the third-order flow term

    L(phi)(t) = sum_{s1..s4} int_0^t S_s1(t - t') Pi_s1 NN(S_s2 phi, S_s3 phi) S_s4 phi dt'

at ``t = delta lam^(-1-eps)`` and fit ``log(||L||_{H^s} / ||phi||_{H^s}^3)``
against ``log lam``.

Discretization: the frequency spacing is ``h = lam / K`` with an integer
``K``, so the box centres sit on lattice index ``K`` for every ``lam`` and the
boxes are odd, symmetric index squares.  Field coefficients are stored as
Fourier-series coefficients; the continuum transform ``(2L)^2 c`` of the box
data is then the exact 0/1 indicator.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np

from .dirac_algebra import ALPHA, SIGNS, apply_matrix_multiplier, projection_multiplier
from .errors import ConfigError, DomainError, QuadratureError
from .evolution import massless_propagator
from .grid import (FREQUENCY, GridSpec, SpinorField, as_frequency, from_fourier,
                   is_power_of_two, sobolev_norm)
from .nonlinearity import cubic_coefficients, nonlinear_coefficients


@dataclass(frozen=True)
class IllposedConfig:
    lam: float
    eps: float
    delta: float
    s: float
    spacing: float | None = None        # frequency spacing h; default lam / K
    n: int | None = None                # lattice size; default: smallest power of two that fits
    n_quad: int = 17                    # Simpson nodes per time sample
    n_times: int = 4                    # samples of (0, t] used for the sup in time
    min_points: int = 8                 # required lattice points across mu

    def __post_init__(self):
        errs = []
        if not (float(self.lam).is_integer() and is_power_of_two(int(self.lam)) and self.lam >= 16):
            errs.append(f"lam must be a dyadic number >= 16, got {self.lam!r}")
        if not 0 < self.eps < 1:
            errs.append(f"eps must lie in (0, 1), got {self.eps!r}")
        if not 0 < self.delta < 1:
            errs.append(f"delta must lie in (0, 1), got {self.delta!r}")
        if self.n_quad < 3 or self.n_quad % 2 == 0:
            errs.append(f"n_quad must be odd and >= 3, got {self.n_quad!r}")
        if errs:
            raise ConfigError(errs)
        if self.t * self.lam > 0.1:
            raise ConfigError(f"t * lam = {self.t * self.lam:.3g} exceeds 0.1")
        w = self.half_width_index
        if w < self.min_points:
            raise ConfigError(f"box half-width resolves only {w} lattice points (< {self.min_points})")
        if 3 * (self.center_index + w) >= self.n_grid // 2:
            raise ConfigError("the output support 3(lam + mu) is clipped by the lattice")

    @property
    def mu(self) -> float:
        return self.lam ** (1 - self.eps)

    @property
    def t(self) -> float:
        return self.delta * self.lam ** (-1 - self.eps)

    @property
    def h(self) -> float:
        if self.spacing is not None:
            return float(self.spacing)
        return self.lam / max(16, int(np.ceil(8 * self.lam**self.eps)))

    @property
    def center_index(self) -> int:
        k = self.lam / self.h
        if abs(k - round(k)) > 1e-9:
            raise ConfigError("lam must be an integer multiple of the spacing")
        return int(round(k))

    @property
    def half_width_index(self) -> int:
        return int(np.floor(self.mu / self.h + 1e-9))

    @property
    def n_grid(self) -> int:
        if self.n is not None:
            return int(self.n)
        need = 2 * (3 * (self.center_index + self.half_width_index) + 1)
        return max(16, 1 << int(np.ceil(np.log2(need))))

    @property
    def grid(self) -> GridSpec:
        return GridSpec.with_spacing(self.n_grid, self.h)


@dataclass
class IllposedRun:
    config: IllposedConfig
    phi_hs_norm: float
    sup_t_L_hs_norm: float
    ratio: float
    pointwise_min_constant: float
    L_norms: list = field(default_factory=list)


def continuum_transform(psi) -> np.ndarray:
    """``(2L)^2 c_k``: samples of the plane Fourier transform ``int f e^{-i xi x} dx``."""
    return as_frequency(psi).values * psi.grid.area


def _box_index_mask(grid: GridSpec, k1: int, k2: int, w: int) -> np.ndarray:
    i = grid.indices
    return (np.abs(i - k1)[:, None] <= w) & (np.abs(i - k2)[None, :] <= w)


def box_data(cfg: IllposedConfig) -> SpinorField:
    """Frequency-space box data; its continuum transform is exactly ``(chi_{R+}, chi_{R-})``."""
    g = cfg.grid
    K, w = cfg.center_index, cfg.half_width_index
    if K + w >= g.n // 2:
        raise ConfigError("box clipped by the lattice boundary")
    c = np.zeros((2, g.n, g.n), complex)
    c[0] = _box_index_mask(g, K, 0, w)
    c[1] = _box_index_mask(g, -K, 0, w)
    return SpinorField(g, c / g.area, FREQUENCY)


# the cubic term ---------------------------------------------------------------

def simpson_weights(n_quad: int, t: float) -> np.ndarray:
    if n_quad < 3 or n_quad % 2 == 0:
        raise ValueError(f"Simpson needs an odd node count >= 3, got {n_quad!r}")
    w = np.ones(n_quad)
    w[1:-1:2], w[2:-1:2] = 4, 2
    return w * (t / (n_quad - 1) / 3)


def _cos_flow(c: np.ndarray, grid: GridSpec, t: float) -> np.ndarray:
    return c * np.cos(t * grid.xi_abs)


def _integrand(c: np.ndarray, grid: GridSpec, tp: float) -> np.ndarray:
    """``U0(-t') NN(cos(t'D) phi, cos(t'D) phi) cos(t'D) phi`` in frequency space."""
    ct = _cos_flow(c, grid, tp)
    return apply_matrix_multiplier(massless_propagator(grid, -tp), cubic_coefficients(ct, grid))


def cubic_term_path(phi: SpinorField, t: float, n_quad: int = 17, n_times: int = 1) -> list[SpinorField]:
    """``L(phi)(t k / n_times)`` for ``k = 1 .. n_times`` (frequency representation).

    The 16 sign sums factor: ``sum_s S_s(t') phi = 2 cos(t'D) phi`` in each of
    the three slots (the nonlinearity is sesquilinear), and
    ``sum_s S_s(t - t') Pi_s`` is the massless propagator ``U0(t - t')``.  Hence
    ``L(t) = 8 U0(t) int_0^t U0(-t') NN(c, c) c dt'`` with ``c = cos(t'D) phi``.
    Each sample interval ``[t(k-1)/n_times, tk/n_times]`` uses Simpson's rule
    with ``n_quad`` nodes.
    """
    if not t > 0:
        raise DomainError(f"t must be positive, got {t!r}")
    grid = phi.grid
    c = as_frequency(phi).values
    J = n_times * (n_quad - 1)
    nodes = np.linspace(0.0, t, J + 1)
    F = [_integrand(c, grid, tp) for tp in nodes]
    w = simpson_weights(n_quad, t / n_times)
    acc = np.zeros_like(c)
    out = []
    for k in range(n_times):
        j0 = k * (n_quad - 1)
        for i in range(n_quad):
            acc = acc + w[i] * F[j0 + i]
        tk = nodes[j0 + n_quad - 1]
        out.append(SpinorField(grid, 8 * apply_matrix_multiplier(massless_propagator(grid, tk), acc), FREQUENCY))
    return out


def cubic_term(phi: SpinorField, t: float, n_quad: int = 17, explicit: bool = False) -> SpinorField:
    """``L(phi)(t)`` in the representation of ``phi``.

    ``explicit=True`` sums the 16 sign tuples one by one (slow; a cross-check
    of the factorized evaluation).
    """
    if explicit:
        out = _cubic_term_explicit(phi, t, n_quad)
    else:
        out = cubic_term_path(phi, t, n_quad, 1)[-1]
    return out if phi.rep == FREQUENCY else from_fourier(out)


def _cubic_term_explicit(phi, t, n_quad):
    if not t > 0:
        raise DomainError(f"t must be positive, got {t!r}")
    g = phi.grid
    c = as_frequency(phi).values
    r = g.xi_abs
    nodes = np.linspace(0.0, t, n_quad)
    w = simpson_weights(n_quad, t)
    P = {s: projection_multiplier(s, g) for s in SIGNS}
    total = np.zeros_like(c)
    for s1, s2, s3, s4 in itertools.product(SIGNS, repeat=4):
        acc = np.zeros_like(c)
        for wi, tp in zip(w, nodes):
            S = lambda s: c * np.exp(-1j * s * tp * r)
            nl = nonlinear_coefficients(S(s2), S(s3), S(s4), g)
            acc += wi * np.exp(-1j * s1 * (t - tp) * r) * apply_matrix_multiplier(P[s1], nl)
        total += acc
    return SpinorField(g, total, FREQUENCY)


def converged_cubic_term(phi: SpinorField, t: float, s: float, n_quad: int = 5,
                         rtol: float = 1e-6, max_quad: int = 513) -> tuple[SpinorField, int]:
    """Double the Simpson node count until ``||L||_{H^s}`` changes by at most ``rtol``.

    Raises :class:`QuadratureError` if the change is still above ``1e-3`` at
    ``max_quad`` nodes; returns the field and the node count used otherwise.
    """
    prev = cubic_term(phi, t, n_quad)
    pn = sobolev_norm(prev, s)
    change = np.inf
    while n_quad < max_quad:
        n_quad = 2 * n_quad - 1
        cur = cubic_term(phi, t, n_quad)
        cn = sobolev_norm(cur, s)
        change = abs(cn - pn) / pn if pn > 0 else abs(cn)
        if change <= rtol:
            return cur, n_quad
        prev, pn = cur, cn
    if change > 1e-3:
        raise QuadratureError(f"cubic term not converged: relative change {change:.2e} at {n_quad} nodes")
    return prev, n_quad


# brute-force oracle -------------------------------------------------------------

def _phase_sum(t, s1, xa, ka, ra, sa):
    """``sum_{s2,s3,s4} p(t, xi, eta, zeta)`` with ``w = s1|xi| + s2|zeta| - s3|eta - zeta| - s4|xi - eta|``."""
    tot = 0.0
    for s2, s3, s4 in itertools.product(SIGNS, repeat=3):
        om = s1 * xa + s2 * ka - s3 * ra - s4 * sa
        z = 1j * t * om
        small = np.abs(z) < 1e-8
        zs = np.where(small, 1.0, z)
        f = np.where(small, 1 + z / 2, np.expm1(zs) / zs)
        tot = tot + t * f
    return tot * np.exp(-1j * s1 * t * xa)


def cubic_term_oracle(phi: SpinorField, t: float) -> SpinorField:
    """Direct frequency-space sum over all support triples with the exact time integral.

    With ``phi`` supported on the index set ``S``, the output coefficient at
    ``xi = rho - kappa + sigma`` receives, for every ``(kappa, rho, sigma)`` in
    ``S^3`` and every sign tuple, ``Pi_s1(xi) p NN_hat(eta) phi(sigma)`` where
    ``eta = rho - kappa`` and ``NN_hat(eta)`` is built from the current
    ``conj(phi(kappa)) alpha^mu phi(rho)``.  Cost ``O(|S|^3)``; intended for tiny
    instances only.
    """
    g = phi.grid
    c = as_frequency(phi).values
    sup = np.argwhere(np.abs(c).sum(axis=0) > 0)
    if len(sup) > 400:
        raise ValueError(f"support of {len(sup)} modes is too large for the oracle")
    k = g.indices[sup]                              # lattice indices (S, 2)
    v = c[:, sup[:, 0], sup[:, 1]].T                # spinor values (S, 2)
    h = g.dxi
    n = g.n
    out = np.zeros((2, n, n), complex)
    P = {s: projection_multiplier(s, g) for s in SIGNS}
    for a in range(len(k)):                         # kappa
        # eta = rho - kappa for all rho; current J^mu(eta) = conj(v_a) alpha^mu v_rho
        eta_k = k - k[a]
        J = np.einsum("a,mab,rb->rm", v[a].conj(), ALPHA, v)          # (S, 3)
        e1, e2 = eta_k[:, 0] * h, eta_k[:, 1] * h
        r2 = e1**2 + e2**2
        inv = np.where(r2 > 0, 1.0 / np.where(r2 > 0, r2, 1.0), 0.0)
        a0 = 1j * (e1 * J[:, 2] - e2 * J[:, 1]) * inv
        a1 = 1j * e2 * J[:, 0] * inv
        a2 = -1j * e1 * J[:, 0] * inv
        # pair with sigma: xi = eta + sigma
        xi_k = eta_k[:, None, :] + k[None, :, :]                       # (S_rho, S_sigma, 2)
        xa = h * np.hypot(xi_k[..., 0], xi_k[..., 1])
        kn = h * np.hypot(k[:, 0], k[:, 1])
        ka = kn[a]                                  # |zeta| = |kappa|
        ra = kn[:, None]                            # |eta - zeta| = |rho|
        sa = kn[None, :]                            # |xi - eta| = |sigma|
        u, w_ = v[:, 0][None, :], v[:, 1][None, :]
        A0, A1, A2 = a0[:, None], a1[:, None], a2[:, None]
        top = A0 * u + (A1 - 1j * A2) * w_
        bot = (A1 + 1j * A2) * u + A0 * w_
        ii = xi_k[..., 0] % n
        jj = xi_k[..., 1] % n
        for s1 in SIGNS:
            ph = _phase_sum(t, s1, xa, ka, ra, sa)
            Pm = P[s1][:, :, ii, jj]                                     # (2, 2, S, S)
            val0 = ph * (Pm[0, 0] * top + Pm[0, 1] * bot)
            val1 = ph * (Pm[1, 0] * top + Pm[1, 1] * bot)
            np.add.at(out[0], (ii, jj), val0)
            np.add.at(out[1], (ii, jj), val1)
    return SpinorField(g, out, FREQUENCY)


# lower bound and sweep --------------------------------------------------------

def target_regions(cfg: IllposedConfig, scale: float = 1.0) -> list[np.ndarray]:
    """Masks of ``S_1 = R_{3mu}^-, S_2 = 3R_mu^+, S_3 = 3R_mu^-, S_4 = R_{3mu}^+``.

    ``scale`` shrinks each half-width ``3 mu`` about its centre (``2/3`` gives the
    interior two-thirds).
    """
    g = cfg.grid
    x1, x2 = g.xi
    hw = 3 * cfg.mu * scale + 1e-9 * cfg.h
    out = []
    for c in (-cfg.lam, 3 * cfg.lam, -3 * cfg.lam, cfg.lam):
        out.append((np.abs(x1 - c) <= hw) & (np.abs(x2) <= hw))
    return out


def pointwise_constant(cfg: IllposedConfig, L: SpinorField) -> float:
    """``min |F L(xi)| lam / (t mu^4)`` over the interior two-thirds of every ``S_i``."""
    F = np.sqrt((np.abs(continuum_transform(L)) ** 2).sum(axis=0))
    vals = []
    for m in target_regions(cfg, 2.0 / 3.0):
        if not m.any():
            raise DomainError("empty interior region")
        vals.append(F[m].min())
    return float(min(vals) * cfg.lam / (cfg.t * cfg.mu**4))


def pointwise_lower_bound(cfg: IllposedConfig) -> float:
    phi = box_data(cfg)
    return pointwise_constant(cfg, cubic_term(phi, cfg.t, cfg.n_quad))


def illposed_run(cfg: IllposedConfig) -> IllposedRun:
    phi = box_data(cfg)
    path = cubic_term_path(phi, cfg.t, cfg.n_quad, cfg.n_times)
    norms = [sobolev_norm(L, cfg.s) for L in path]
    pn = sobolev_norm(phi, cfg.s)
    sup = max(norms)
    return IllposedRun(cfg, pn, sup, sup / pn**3, pointwise_constant(cfg, path[-1]), norms)


@dataclass
class SweepResult:
    slope: float
    intercept: float
    residual: float
    runs: list

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "mu", "t", "phi_hs", "L_hs", "ratio", "c1"])
            for r in self.runs:
                c = r.config
                w.writerow([repr(float(c.lam)), repr(c.mu), repr(c.t), repr(r.phi_hs_norm),
                            repr(r.sup_t_L_hs_norm), repr(r.ratio), repr(r.pointwise_min_constant)])
            w.writerow(["slope", repr(self.slope), "residual", repr(self.residual), "", "", ""])


def fit_slope(lams, ratios) -> tuple[float, float, float]:
    """Least-squares line through ``(log lam, log ratio)``; returns slope, intercept, rms residual."""
    x, y = np.log(np.asarray(lams, float)), np.log(np.asarray(ratios, float))
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(res**2)))


def lambda_sweep(lambdas, eps: float, delta: float, s: float, **kw) -> SweepResult:
    if len(lambdas) < 4:
        raise ValueError("a sweep needs at least 4 values of lam")
    runs = []
    for lam in lambdas:
        r = illposed_run(IllposedConfig(lam, eps, delta, s, **kw))
        if not (np.isfinite(r.ratio) and r.ratio > 0):
            raise QuadratureError(f"invalid ratio {r.ratio!r} at lam = {lam}")
        runs.append(r)
    slope, b, res = fit_slope([r.config.lam for r in runs], [r.ratio for r in runs])
    return SweepResult(slope, b, res, runs)
