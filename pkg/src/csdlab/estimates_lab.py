"""Randomized probes of the bilinear, null-form and interaction estimates.

Probes work on a space-time frequency lattice with spacings ``(dtau, dxi)``
chosen per configuration.  A field is a set of Fourier-series coefficients
``c(X)`` on that lattice, and torus norms are ``||u||^2 = vol * sum |c|^2``
with ``vol = (2 pi)^3 / (dtau dxi^2)``; products of fields are exact lattice
convolutions, so every measured ratio is a genuine ratio of torus L2 norms.

All upper-bound constants are taken with implicit constant 1.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .dirac_algebra import angle
from .grid import dyadic_of
from .multipliers import (FREQUENCY, DyadicBox, SpaceTimeField, modulation_labels)


# X^{s,b} ----------------------------------------------------------------------

def xsb_norm(u: SpaceTimeField, sign: int, s: float, b: float) -> float:
    """Dyadic ``X^{s,b}_sign`` norm of a transformed space-time field."""
    if u.rep != FREQUENCY:
        raise ValueError("xsb_norm needs the space-time transform (see space_time_transform)")
    nl, ll = modulation_labels(u, sign)
    w = (nl[None] ** (2 * s)) * ll ** (2 * b)
    m = np.abs(u.values) ** 2
    if m.ndim == 4:
        m = m.sum(axis=1)
    return float(np.sqrt(u.volume * (w * m).sum()))


def xsb_box_masses(u: SpaceTimeField, sign: int) -> dict:
    """``||P_K u||^2`` for every box ``K^sign_{N,L}`` that carries mass."""
    nl, ll = modulation_labels(u, sign)
    m = np.abs(u.values) ** 2
    if m.ndim == 4:
        m = m.sum(axis=1)
    nl = np.broadcast_to(nl[None], ll.shape)
    out = {}
    for N in np.unique(nl):
        for L in np.unique(ll[nl == N]):
            out[(int(N), int(L))] = float(u.volume * m[(nl == N) & (ll == L)].sum())
    return out


# reports --------------------------------------------------------------------

@dataclass
class ProbeReport:
    probe_name: str
    parameters: dict
    n_samples: int
    measured_min_ratio: float
    measured_max_ratio: float
    theoretical_bound: float
    seed: int | None = None
    skipped: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        if self.theoretical_bound == 0:
            return 0.0 if self.measured_max_ratio == 0 else np.inf
        return self.measured_max_ratio / self.theoretical_bound

    def row(self) -> list:
        params = ";".join(f"{k}={v}" for k, v in self.parameters.items())
        return [self.probe_name, params, self.n_samples, repr(self.measured_min_ratio),
                repr(self.measured_max_ratio), repr(self.theoretical_bound), repr(self.slack),
                "" if self.seed is None else self.seed]


REPORT_HEADER = ["probe", "params", "n", "min_ratio", "max_ratio", "bound", "slack", "seed"]


def write_reports(path, reports):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_HEADER)
        for r in reports:
            w.writerow(r.row())


# probe lattice ------------------------------------------------------------

@dataclass(frozen=True)
class BoxSupport:
    """Lattice points of a box, as integer offsets into a bounding array."""

    box: DyadicBox
    dtau: float
    dxi: float
    origin: tuple          # integer lattice index of array element [0, 0, 0]
    mask: np.ndarray       # bool (n_tau, n1, n2)

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    def coords(self):
        """``(tau, xi1, xi2)`` arrays on the bounding grid."""
        it, i1, i2 = (np.arange(s) + o for s, o in zip(self.mask.shape, self.origin))
        return np.meshgrid(it * self.dtau, i1 * self.dxi, i2 * self.dxi, indexing="ij")


def box_support(box: DyadicBox, dtau: float, dxi: float, strip=None) -> BoxSupport:
    """Lattice points of ``K^sign_{N,L}`` (with ``xi != 0``), optionally cut to a strip ``(omega, r)``."""
    R = 2 * box.N
    k = int(np.ceil(R / dxi))
    tmax = R + 2 * box.L
    kt = int(np.ceil(tmax / dtau))
    it, i1, i2 = np.arange(-kt, kt + 1), np.arange(-k, k + 1), np.arange(-k, k + 1)
    T, X1, X2 = np.meshgrid(it * dtau, i1 * dxi, i2 * dxi, indexing="ij")
    r = np.hypot(X1, X2)
    m = (r > 0) & (dyadic_of(r) == box.N) & (dyadic_of(np.abs(T + box.sign * r)) == box.L)
    if strip is not None:
        (w1, w2), width = strip
        m &= np.abs(-w2 * X1 + w1 * X2) <= width
    return BoxSupport(box, dtau, dxi, (-kt, -k, -k), m)


def _volume(dtau, dxi):
    return (2 * np.pi) ** 3 / (dtau * dxi * dxi)


def _lattice_for(boxes, dxi=None, dtau=None):
    nmax = max(b.N for b in boxes)
    lmin = min(b.L for b in boxes)
    if dxi is None:
        dxi = max(nmax, 2) / 8
    if dtau is None:
        dtau = min(0.5, lmin / 2)
    return dtau, dxi


def _random_coeffs(sup: BoxSupport, rng) -> np.ndarray:
    c = np.zeros(sup.mask.shape, complex)
    n = sup.count
    c[sup.mask] = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return c


def _coherent_coeffs(sup: BoxSupport) -> np.ndarray:
    return sup.mask.astype(complex)


def _correlate(c1: np.ndarray, s1: BoxSupport, c2: np.ndarray, s2: BoxSupport):
    """Coefficients of ``u1 conj(u2)``: ``C(X0) = sum_X c1(X0 + X) conj(c2(X))``.

    Returns the array and the lattice index of its first element.
    """
    out = fftconvolve(c1, np.conj(c2[::-1, ::-1, ::-1]))
    origin = tuple(o1 - (o2 + n2 - 1) for o1, o2, n2 in zip(s1.origin, s2.origin, c2.shape))
    return out, origin


def _box_mask_on(shape, origin, dtau, dxi, box: DyadicBox) -> np.ndarray:
    it, i1, i2 = (np.arange(s) + o for s, o in zip(shape, origin))
    T, X1, X2 = np.meshgrid(it * dtau, i1 * dxi, i2 * dxi, indexing="ij", sparse=True)
    r = np.hypot(X1, X2)
    return (dyadic_of(r) == box.N) & (dyadic_of(np.abs(T + box.sign * r)) == box.L)


def bilinear_bound(b0: DyadicBox, b1: DyadicBox, b2: DyadicBox) -> float:
    """Minimum of the three bilinear constants, implicit constants set to 1."""
    N = {0: b0.N, 1: b1.N, 2: b2.N}
    L = {0: b0.L, 1: b1.L, 2: b2.L}
    n012 = min(N.values())
    c1 = (n012 * min(L[1], L[2])) ** 0.5 * (min(N[1], N[2]) * max(L[1], L[2])) ** 0.25
    c2 = [(n012 * min(L[0], L[j])) ** 0.5 * (min(N[0], N[j]) * max(L[0], L[j])) ** 0.25 for j in (1, 2)]
    c3 = (n012**2 * min(L.values())) ** 0.5
    return float(min(c1, *c2, c3))


def bilinear_ratio(c1, s1, c2, s2, b0: DyadicBox) -> float:
    """``||P_{K0}(u1 conj(u2))|| / (||u1|| ||u2||)`` for lattice coefficients."""
    prod, origin = _correlate(c1, s1, c2, s2)
    m = _box_mask_on(prod.shape, origin, s1.dtau, s1.dxi, b0)
    num = np.sqrt((np.abs(prod[m]) ** 2).sum())
    den = np.sqrt(_volume(s1.dtau, s1.dxi) * (np.abs(c1) ** 2).sum() * (np.abs(c2) ** 2).sum())
    return float(num / den) if den > 0 else 0.0


def bilinear_constant_probe(boxes, n_trials: int = 20, seed: int = 0, rng=None,
                            coherent: bool = True, dxi=None, dtau=None) -> ProbeReport:
    """Monte-Carlo ratio ``||P_{K0}(u1 conj(u2))|| / (||u1|| ||u2||)`` against the bilinear constant.

    ``boxes = (K0, K1, K2)``.  Trials draw i.i.d. complex Gaussian
    coefficients on ``K1`` and ``K2``; with ``coherent`` set, one extra trial
    uses constant coefficients (indicator data), which is far closer to
    extremal than incoherent noise.
    """
    b0, b1, b2 = boxes
    dtau, dxi = _lattice_for(boxes, dxi, dtau)
    s1, s2 = box_support(b1, dtau, dxi), box_support(b2, dtau, dxi)
    params = {"K0": _box_str(b0), "K1": _box_str(b1), "K2": _box_str(b2), "dtau": dtau, "dxi": dxi}
    bound = bilinear_bound(b0, b1, b2)
    if s1.count == 0 or s2.count == 0:
        return ProbeReport("bilinear", params, 0, 0.0, 0.0, bound, seed, skipped=True)
    rng = np.random.default_rng(seed) if rng is None else rng
    ratios = [bilinear_ratio(_random_coeffs(s1, rng), s1, _random_coeffs(s2, rng), s2, b0)
              for _ in range(n_trials)]
    if coherent:
        ratios.append(bilinear_ratio(_coherent_coeffs(s1), s1, _coherent_coeffs(s2), s2, b0))
    return ProbeReport("bilinear", params, len(ratios), float(min(ratios)), float(max(ratios)), bound, seed)


def cauchy_schwarz_bound(b0: DyadicBox, support: BoxSupport) -> float:
    """``(|K0 cap lattice| / vol)^{1/2}``: the ratio bound from pointwise Cauchy-Schwarz."""
    # count K0 points on a window large enough for any product of the supports
    big = box_support(DyadicBox(b0.sign, b0.N, b0.L), support.dtau, support.dxi)
    return float(np.sqrt(big.count / _volume(support.dtau, support.dxi)))


def _box_str(b: DyadicBox) -> str:
    return f"{'+' if b.sign > 0 else '-'}{b.N}/{b.L}"


def default_bilinear_configs() -> list:
    """Twenty ``(K0, K1, K2)`` configurations covering low/high and equal/opposite-sign interactions."""
    out = []
    triples = [(1, 1, 1), (1, 2, 2), (2, 2, 2), (1, 4, 4), (4, 2, 4)]
    ls = [(1, 1, 1), (1, 1, 2), (2, 1, 1), (1, 2, 2)]
    for (N0, N1, N2), (L0, L1, L2) in itertools.product(triples, ls):
        s2 = -1 if (N0 + L2) % 2 else 1
        out.append((DyadicBox(1, N0, L0), DyadicBox(1, N1, L1), DyadicBox(s2, N2, L2)))
    return out


# null form ---------------------------------------------------------------------

def _points(c: np.ndarray, sup: BoxSupport):
    idx = np.argwhere(sup.mask)
    lat = idx + np.asarray(sup.origin)
    return lat, c[sup.mask]


def angle_weighted_product(c1, s1: BoxSupport, c2, s2: BoxSupport, max_pairs: int = 2_000_000) -> np.ndarray:
    """``sum_{X0 = X2 - X1} angle(sign1 xi1, sign2 xi2) conj(c1(X1)) c2(X2)`` by direct pair summation.

    Returns the output coefficients as a flat array over the bounding box of
    the difference set (only its l2 norm enters the probe).
    """
    p1, v1 = _points(c1, s1)
    p2, v2 = _points(c2, s2)
    sg1, sg2 = s1.box.sign, s2.box.sign
    xi1 = p1[:, 1:] * s1.dxi * sg1
    xi2 = p2[:, 1:] * s2.dxi * sg2
    lo = p2.min(axis=0) - p1.max(axis=0)
    span = p2.max(axis=0) - p1.min(axis=0) - lo + 1
    acc = np.zeros(int(np.prod(span)), complex)
    chunk = max(1, max_pairs // len(p2))
    for a in range(0, len(p1), chunk):
        q1, w1, x1 = p1[a:a + chunk], v1[a:a + chunk], xi1[a:a + chunk]
        th = angle(x1[:, None, :], xi2[None, :, :])
        val = th * np.conj(w1)[:, None] * v2[None, :]
        off = p2[None, :, :] - q1[:, None, :] - lo
        flat = np.ravel_multi_index((off[..., 0].ravel(), off[..., 1].ravel(), off[..., 2].ravel()), span)
        acc += np.bincount(flat, val.real.ravel(), acc.size) + 1j * np.bincount(flat, val.imag.ravel(), acc.size)
    return acc


def nullform_ratio(c1, s1, c2, s2) -> float:
    num = np.sqrt((np.abs(angle_weighted_product(c1, s1, c2, s2)) ** 2).sum())
    den = np.sqrt(_volume(s1.dtau, s1.dxi) * (np.abs(c1) ** 2).sum() * (np.abs(c2) ** 2).sum())
    return float(num / den) if den > 0 else 0.0


def nullform_constant_probe(boxes, r: float, omega, n_trials: int = 10, seed: int = 0, rng=None,
                            coherent: bool = True, dxi=None, dtau=None) -> ProbeReport:
    """Angle-weighted product of ``P_{T_r(omega)} u1`` and ``u2`` against ``(r L1 L2)^{1/2}``."""
    b1, b2 = boxes
    dtau, dxi = _lattice_for(boxes, dxi, dtau)
    w = np.asarray(omega, float)
    w = w / np.hypot(*w)
    s1 = box_support(b1, dtau, dxi, strip=(tuple(w), r))
    s2 = box_support(b2, dtau, dxi)
    params = {"K1": _box_str(b1), "K2": _box_str(b2), "r": r,
              "omega": f"({w[0]:.4f},{w[1]:.4f})", "dtau": dtau, "dxi": dxi}
    bound = float(np.sqrt(r * b1.L * b2.L))
    if s1.count == 0 or s2.count == 0:
        return ProbeReport("nullform", params, 0, 0.0, 0.0, bound, seed, skipped=True)
    rng = np.random.default_rng(seed) if rng is None else rng
    ratios = [nullform_ratio(_random_coeffs(s1, rng), s1, _random_coeffs(s2, rng), s2)
              for _ in range(n_trials)]
    if coherent:
        ratios.append(nullform_ratio(_coherent_coeffs(s1), s1, _coherent_coeffs(s2), s2))
    return ProbeReport("nullform", params, len(ratios), float(min(ratios)), float(max(ratios)), bound, seed)


def default_nullform_configs() -> list:
    """Ten ``((K1, K2), r, omega)`` configurations: parallel and transverse strips, both sign pairs."""
    out = []
    for (N1, N2), s2, L2, (r, th) in itertools.product(
            [(2, 2), (2, 4)], (1, -1), (1,), [(0.5, 0.0), (1.0, np.pi / 2)]):
        out.append(((DyadicBox(1, N1, 1), DyadicBox(s2, N2, L2)), r, (np.cos(th), np.sin(th))))
    out.append(((DyadicBox(1, 2, 2), DyadicBox(1, 2, 1)), 1.0, (1.0, 0.0)))
    out.append(((DyadicBox(-1, 4, 1), DyadicBox(1, 2, 2)), 0.5, (0.0, 1.0)))
    return out


# interaction inequalities ------------------------------------------------

SIGN_TRIPLES = list(itertools.product((1, -1), repeat=3))


def exceptional(xi0n, xi1n, xi2n, s1, s2) -> np.ndarray:
    """The excluded branch ``|xi0| << |xi1| ~ |xi2|`` with opposite signs, fixed as ``|xi0| < min/2``."""
    return (s1 != s2) & (xi0n < 0.5 * np.minimum(xi1n, xi2n))


def interaction_terms(xi1, xi2, tau1, tau2, signs):
    """``max|h_j|``, ``theta_12`` and the two right-hand sides for ``X0 = X1 - X2``."""
    s0, s1, s2 = (np.asarray(x) for x in signs)
    xi0 = xi1 - xi2
    tau0 = tau1 - tau2
    n0, n1, n2 = (np.hypot(x[..., 0], x[..., 1]) for x in (xi0, xi1, xi2))
    h = np.stack([tau0 + s0 * n0, tau1 + s1 * n1, tau2 + s2 * n2])
    th = angle(s1[..., None] * xi1, s2[..., None] * xi2)
    rhs8 = np.minimum(n1, n2) * th**2
    with np.errstate(divide="ignore", invalid="ignore"):
        rhs9 = np.where(n0 > 0, n1 * n2 / np.where(n0 > 0, n0, 1) * th**2, np.inf)
    return np.abs(h).max(axis=0), th, rhs8, rhs9, (n0, n1, n2)


def _ratio(lhs, rhs):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1), np.inf)


def interaction_floor(n_rho: int = 201, n_theta: int = 361, safety: float = 0.9) -> dict:
    """Deterministic grid-search oracle for the infimum of LHS/RHS over ``tau``.

    For fixed frequencies and signs the smallest achievable ``max|h_j|`` is
    ``|s0|xi0| - s1|xi1| + s2|xi2|| / 3`` (all three ``h_j`` equal), and both
    ratios are scale invariant, so the search runs over ``|xi2|/|xi1|``
    (log-spaced in ``[1e-3, 1e3]``), the angle between ``xi1`` and ``xi2``
    and all sign triples.  The floors are ``safety`` times the grid minima.
    """
    rho = np.logspace(-3, 3, n_rho)
    phi = np.linspace(0, np.pi, n_theta + 2)[1:-1]      # open interval: theta = 0, pi are degenerate
    R, P = np.meshgrid(rho, phi, indexing="ij")
    xi1 = np.stack([np.ones_like(R), np.zeros_like(R)], axis=-1)
    xi2 = np.stack([R * np.cos(P), R * np.sin(P)], axis=-1)
    m8, m9 = np.inf, np.inf
    for s0, s1, s2 in SIGN_TRIPLES:
        n0 = np.hypot(*(xi1 - xi2).transpose(2, 0, 1))
        n1, n2 = np.ones_like(R), R
        lhs = np.abs(s0 * n0 - s1 * n1 + s2 * n2) / 3
        th = angle(s1 * xi1, s2 * xi2)
        r8 = _ratio(lhs, np.minimum(n1, n2) * th**2)
        r9 = _ratio(lhs, n1 * n2 / n0 * th**2)
        r9 = np.where(exceptional(n0, n1, n2, s1, s2), np.inf, r9)
        m8, m9 = min(m8, r8.min()), min(m9, r9.min())
    return {"c0_min": safety * float(m8), "c0_product": safety * float(m9),
            "grid_min_min": float(m8), "grid_min_product": float(m9)}


def interaction_probe(n_samples: int = 100_000, seed: int = 0, rng=None, floor: dict | None = None,
                      chunk: int = 20_000) -> tuple[ProbeReport, ProbeReport]:
    """Random bilinear interactions checked against both interaction inequalities.

    Frequencies have log-uniform sizes in ``[1e-2, 1e2]`` and uniform
    directions; each ``tau_j`` sits within a log-uniform distance of its cone.
    Samples with vanishing right-hand side count as passes and are left out of
    the minimum.  Returns two reports: ``interaction-min`` for the right-hand
    side ``min(|xi1|, |xi2|) theta^2`` and ``interaction-product`` for
    ``|xi1||xi2|/|xi0| theta^2``.  Their ``theoretical_bound`` (and
    ``extra['c0']``) is the grid-search floor the minimum must exceed.
    """
    rng = np.random.default_rng(seed) if rng is None else rng
    floor = interaction_floor() if floor is None else floor
    mins = [np.inf, np.inf]
    maxs = [0.0, 0.0]
    done = 0
    while done < n_samples:
        k = min(chunk, n_samples - done)

        def vec():
            r = 10 ** rng.uniform(-2, 2, k)
            a = rng.uniform(0, 2 * np.pi, k)
            return np.stack([r * np.cos(a), r * np.sin(a)], axis=-1)

        xi1, xi2 = vec(), vec()
        sg = np.asarray(SIGN_TRIPLES)[rng.integers(0, len(SIGN_TRIPLES), k)].T
        n1, n2 = np.hypot(*xi1.T), np.hypot(*xi2.T)
        off = lambda: rng.choice([-1, 1], k) * 10 ** rng.uniform(-4, 1, k) * np.maximum(n1, n2)
        tau1 = -sg[1] * n1 + off()
        tau2 = -sg[2] * n2 + off()
        lhs, th, r8, r9, (q0, q1, q2) = interaction_terms(xi1, xi2, tau1, tau2, sg)
        keep = (q0 > 0) & (q1 > 0) & (q2 > 0)
        rat8 = _ratio(lhs, r8)[keep]
        rat9 = np.where(exceptional(q0, q1, q2, sg[1], sg[2]), np.inf, _ratio(lhs, r9))[keep]
        for i, rr in enumerate((rat8, rat9)):
            fin = rr[np.isfinite(rr)]
            if fin.size:
                mins[i] = min(mins[i], float(fin.min()))
                maxs[i] = max(maxs[i], float(fin.max()))
        done += k
    reps = []
    for i, key in enumerate(("min", "product")):
        c0 = floor[f"c0_{key}"]
        reps.append(ProbeReport(f"interaction-{key}", {"rhs": key}, n_samples, mins[i], maxs[i],
                                c0, seed, extra={"c0": c0}))
    return tuple(reps)
