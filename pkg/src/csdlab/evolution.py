"""Linear propagators, the nonlinear Duhamel solver and Picard iterates.

The spinor equation is ``i d_t psi = (alpha . xi + m beta) psi + NN(psi, psi) psi``
in frequency space (see :mod:`csdlab.nonlinearity` for the sign table).
The linear part is integrated exactly per mode; the nonlinearity is stepped
with a Lawson (integrating-factor) RK4 scheme.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dirac_algebra import apply_matrix_multiplier, check_sign, projection_multiplier
from .errors import NumericalError
from .grid import (FREQUENCY, GridSpec, SpinorField, as_frequency, as_position, from_fourier,
                   sobolev_norm, sobolev_weights, top_shell_fraction)
from .nonlinearity import cubic_coefficients


def _like(psi: SpinorField, c: np.ndarray) -> SpinorField:
    out = SpinorField(psi.grid, c, FREQUENCY)
    return out if psi.rep == FREQUENCY else from_fourier(out)


def smooth_random_spinor(grid: GridSpec, rng, sigma: float = 2.0, amp: float = 1.0) -> SpinorField:
    """Random spinor with a Gaussian spectral envelope of width ``sigma``, scaled to ``max|psi| = amp``."""
    shape = (2, grid.n, grid.n)
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    c *= np.exp(-grid.xi_abs**2 / (2 * sigma**2))
    psi = as_position(SpinorField(grid, c, FREQUENCY))
    return psi * (amp / np.abs(psi.values).max())


# linear propagators ----------------------------------------------------------

def half_wave(psi: SpinorField, s: int, t: float) -> SpinorField:
    """``S_s(t) psi = exp(-i s t D) psi`` with ``D = |grad|``."""
    s = check_sign(s)
    c = as_frequency(psi).values
    return _like(psi, c * np.exp(-1j * s * t * psi.grid.xi_abs))


def dirac_propagator(grid: GridSpec, m: float, t: float) -> np.ndarray:
    """``exp(-i t (alpha.xi + m beta))`` per mode, shape ``(2, 2, n, n)``.

    Closed form: ``cos(w t) I - i sin(w t)/w H`` with ``w = sqrt(|xi|^2 + m^2)``,
    since ``H^2 = w^2 I``.
    """
    x1, x2 = grid.xi
    w = np.sqrt(grid.xi_abs**2 + m * m)
    cs = np.cos(w * t)
    sn = t * np.sinc(w * t / np.pi)  # sin(w t)/w, finite at w = 0
    U = np.empty((2, 2, *grid.shape), complex)
    U[0, 0] = cs - 1j * sn * m
    U[1, 1] = cs + 1j * sn * m
    U[0, 1] = -1j * sn * (x1 - 1j * x2)
    U[1, 0] = -1j * sn * (x1 + 1j * x2)
    return U


def linear_flow(psi0: SpinorField, m: float, t: float) -> SpinorField:
    """Exact solution of the linear massive Dirac equation at time ``t``."""
    c = as_frequency(psi0).values
    return _like(psi0, apply_matrix_multiplier(dirac_propagator(psi0.grid, m, t), c))


def massless_propagator(grid: GridSpec, t: float) -> np.ndarray:
    """``sum_s exp(-i s t |xi|) Pi_s``, i.e. ``dirac_propagator`` at ``m = 0``."""
    return dirac_propagator(grid, 0.0, t)


# nonlinear evolution -------------------------------------------------------

@dataclass(frozen=True)
class EvolutionConfig:
    m: float
    T: float
    n_steps: int
    n_quad: int = 5
    amp: float | None = None
    hs: tuple = (0.0,)
    s: float = 0.25             # Sobolev index of the Picard diagnostics p_n, q_n
    nonlinear: bool = True
    snapshot_times: tuple = ()

    def __post_init__(self):
        if not self.T != 0 or not np.isfinite(self.T):
            raise ValueError(f"T must be finite and nonzero, got {self.T!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if self.n_quad not in (3, 5):
            raise ValueError(f"n_quad must be 3 or 5, got {self.n_quad!r}")
        if self.m < 0:
            raise ValueError(f"mass must be nonnegative, got {self.m!r}")


@dataclass
class TrajectoryRecord:
    times: list = field(default_factory=list)
    charge: list = field(default_factory=list)
    hs_norms: dict = field(default_factory=dict)
    snapshots: dict = field(default_factory=dict)
    final: SpinorField | None = None

    def append(self, t, c, grid, hs):
        self.times.append(float(t))
        m = np.abs(c) ** 2
        self.charge.append(float(grid.area * m.sum()))
        msum = m.sum(axis=0)
        for s in hs:
            self.hs_norms.setdefault(s, []).append(float(np.sqrt(grid.area * (msum * sobolev_weights(grid, s)).sum())))

    @property
    def charge_drift(self) -> float:
        q0 = self.charge[0]
        return abs(self.charge[-1] - q0) / q0 if q0 > 0 else 0.0

    def write_csv(self, path):
        keys = list(self.hs_norms)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "Q"] + [f"Hs({s:g})" for s in keys])
            for i, t in enumerate(self.times):
                w.writerow([repr(t), repr(self.charge[i])] + [repr(self.hs_norms[s][i]) for s in keys])


def _rhs(c, grid):
    """Frequency-space ``-i NN(psi, psi) psi``."""
    return -1j * cubic_coefficients(c, grid)


def evolve(psi0: SpinorField, cfg: EvolutionConfig) -> TrajectoryRecord:
    """Integrate from 0 to ``cfg.T`` in ``cfg.n_steps`` Lawson-RK4 steps (``T < 0`` runs backwards)."""
    grid = psi0.grid
    if cfg.n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    frac = top_shell_fraction(psi0)
    if frac > 0.1:
        warnings.warn(f"initial data has {frac:.1%} of its mass in the top dyadic shell", RuntimeWarning)
    h = cfg.T / cfg.n_steps
    E = dirac_propagator(grid, cfg.m, h)
    Eh = dirac_propagator(grid, cfg.m, h / 2)
    ap = apply_matrix_multiplier

    c = as_frequency(psi0).values.copy()
    rec = TrajectoryRecord()
    rec.append(0.0, c, grid, cfg.hs)
    snaps = sorted(cfg.snapshot_times)
    for k in range(1, cfg.n_steps + 1):
        if cfg.nonlinear:
            k1 = _rhs(c, grid)
            ch = ap(Eh, c)
            k2 = _rhs(ch + 0.5 * h * ap(Eh, k1), grid)
            k3 = _rhs(ch + 0.5 * h * k2, grid)
            k4 = _rhs(ap(E, c) + h * ap(Eh, k3), grid)
            c = ap(E, c) + (h / 6) * (ap(E, k1) + 2 * ap(Eh, k2 + k3) + k4)
        else:
            c = ap(E, c)
        if not np.all(np.isfinite(c)):
            raise NumericalError(f"non-finite values after step {k} (t = {k * h:g})")
        t = k * h
        rec.append(t, c, grid, cfg.hs)
        for ts in snaps:
            if abs(ts - t) <= 1e-12 * max(1.0, abs(t)):
                rec.snapshots[ts] = from_fourier(SpinorField(grid, c.copy(), FREQUENCY))
    rec.final = _like(psi0, c)
    return rec


# Picard iteration --------------------------------------------------------------

def cumulative_quadrature(g: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order cumulative integral ``G_j = int_0^{t_j} g`` on a uniform grid (axis 0).

    Interior intervals use the centred four-point rule, the two end intervals
    one-sided cubic interpolation.
    """
    J = g.shape[0] - 1
    if J < 3:
        raise ValueError("need at least 4 time nodes")
    inc = np.empty_like(g[1:])
    inc[0] = 9 * g[0] + 19 * g[1] - 5 * g[2] + g[3]
    inc[1:J - 1] = -g[0:J - 2] + 13 * g[1:J - 1] + 13 * g[2:J] - g[3:J + 1]
    inc[J - 1] = 9 * g[J] + 19 * g[J - 1] - 5 * g[J - 2] + g[J - 3]
    out = np.zeros_like(g)
    out[1:] = np.cumsum(inc, axis=0) * (h / 24)
    return out


@dataclass
class PicardResult:
    p: list
    q: list
    times: np.ndarray
    iterates_final: list
    diverged: bool = False

    @property
    def ratios(self) -> list:
        return [self.q[i + 1] / self.q[i] if self.q[i] > 0 else 0.0 for i in range(len(self.q) - 1)]

    def pairs(self) -> list:
        """``(p_n, q_n)`` for ``n = 1 .. n_iter`` (``p_0`` is stored separately as ``p[0]``)."""
        return list(zip(self.p[1:], self.q))


def _split_hs(c_t: np.ndarray, grid: GridSpec, s: float, Pp, Pm) -> np.ndarray:
    """``sum_s ||Pi_s u(t_j)||_{H^s}`` for every time sample ``j``."""
    w = sobolev_weights(grid, s)
    out = 0.0
    for P in (Pp, Pm):
        pc = np.einsum("ab...,jb...->ja...", P, c_t)
        out = out + np.sqrt(grid.area * (np.abs(pc) ** 2 * w).sum(axis=(1, 2, 3)))
    return out


def picard_sequence(psi0: SpinorField, cfg: EvolutionConfig, n_iter: int,
                    stop_ratio: float | None = None) -> PicardResult:
    """Picard iterates of the Duhamel formula around the massless half-wave flow.

    ``psi^(0)(t) = sum_s S_s(t) Pi_s psi0``; each iterate inserts the previous
    one into both the mass term and the cubic term.  Time integrals use a
    uniform grid of ``n_steps * (n_quad - 1)`` intervals.  Returns the sup-in-time
    diagnostics ``p_n`` (``n = 0 .. n_iter``) and ``q_n`` (``n = 1 .. n_iter``).
    With ``stop_ratio`` set, iteration stops early once ``q_{n+1}/q_n`` exceeds it.
    """
    if n_iter < 2:
        raise ValueError("n_iter must be >= 2")
    grid = psi0.grid
    J = cfg.n_steps * (cfg.n_quad - 1)
    times = np.linspace(0.0, cfg.T, J + 1)
    h = times[1] - times[0]
    c0 = as_frequency(psi0).values
    U = np.stack([massless_propagator(grid, t) for t in times])        # (J+1, 2, 2, n, n)
    Uinv = np.conj(np.swapaxes(U, 1, 2))
    beta = np.array([1.0, -1.0])[None, :, None, None]
    Pp, Pm = projection_multiplier(1, grid), projection_multiplier(-1, grid)
    free = np.einsum("jab...,b...->ja...", U, c0)

    cur = free
    p = [float(_split_hs(cur, grid, cfg.s, Pp, Pm).max())]
    q, finals = [], [cur[-1]]
    for _ in range(n_iter):
        src = cfg.m * beta * cur
        if cfg.nonlinear:
            src = src + np.stack([cubic_coefficients(cj, grid) for cj in cur])
        g = np.einsum("jab...,jb...->ja...", Uinv, src)
        G = cumulative_quadrature(g, h)
        new = free - 1j * np.einsum("jab...,jb...->ja...", U, G)
        if not np.all(np.isfinite(new)):
            raise NumericalError("non-finite Picard iterate")
        q.append(float(_split_hs(new - cur, grid, cfg.s, Pp, Pm).max()))
        p.append(float(_split_hs(new, grid, cfg.s, Pp, Pm).max()))
        finals.append(new[-1])
        cur = new
        if stop_ratio is not None and len(q) > 1 and q[-2] > 0 and q[-1] > stop_ratio * q[-2]:
            break
    res = PicardResult(p, q, times, [SpinorField(grid, f, FREQUENCY) for f in finals])
    res.diverged = _diverged(q)
    return res


def _diverged(q) -> bool:
    run = 0
    for a, b in zip(q, q[1:]):
        run = run + 1 if b > a else 0
        if run >= 3:
            return True
    return False


def contraction_threshold(shape: SpinorField, cfg: EvolutionConfig, n_iter: int = 6,
                          target: float = 0.5, start: float = 1.0, rtol: float = 0.05,
                          max_iter: int = 40) -> float:
    """Largest ``delta = ||psi0||_{H^s}`` (to ``rtol``) for which every ``q_{n+1}/q_n <= target``.

    ``psi0`` is ``shape`` rescaled to the trial size.  Bisection on ``log delta``
    assumes the contraction fails for large data and holds as ``delta -> 0``.
    """
    unit = shape * (1.0 / sobolev_norm(shape, cfg.s))

    def ok(d):
        try:
            r = picard_sequence(unit * d, cfg, n_iter, stop_ratio=target)
        except NumericalError:
            return False
        return len(r.q) == n_iter and not r.diverged and max(r.ratios) <= target

    lo = hi = start
    if ok(start):
        while ok(hi * 4):
            hi *= 4
            if hi > 1e8:
                return np.inf
        lo, hi = hi, hi * 4
    else:
        while not ok(lo / 4):
            lo /= 4
            if lo < 1e-12:
                return 0.0
        lo, hi = lo / 4, lo
    for _ in range(max_iter):
        if hi / lo - 1 < rtol:
            break
        mid = np.sqrt(lo * hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo
