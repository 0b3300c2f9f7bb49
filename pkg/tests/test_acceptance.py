"""Acceptance suite: one test per criterion, each recording a pass/fail line."""

import time
from math import factorial

import numpy as np
import pytest

from csdlab.dirac_algebra import (algebra_residuals, commutator_residual, projection_product_norm,
                                  projection_product_norm_svd, projection_residuals)
from csdlab.estimates_lab import (bilinear_constant_probe, default_bilinear_configs,
                                  default_nullform_configs, interaction_floor, interaction_probe,
                                  nullform_constant_probe)
from csdlab.evolution import (EvolutionConfig, contraction_threshold, evolve, half_wave, linear_flow,
                              picard_sequence, smooth_random_spinor)
from csdlab.grid import GridSpec, SpinorField, as_frequency, charge, l2_norm, sobolev_norm
from csdlab.illposedness import (IllposedConfig, box_data, cubic_term, cubic_term_oracle,
                                 lambda_sweep)
from csdlab.nonlinearity import (cs_gauss_residual, gauge_potential, meanfree_charge_density_norm,
                                 nonlinear_term, nonlinear_term_gamma_form)

pytestmark = pytest.mark.acceptance


def test_criterion_1_dirac_algebra(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    xi = rng.standard_normal((1000, 2)) * 10 ** rng.uniform(-3, 3, (1000, 1))
    worst = max(algebra_residuals().values())
    worst = max(worst, max(projection_residuals(xi).values()))
    for s in (1, -1):
        for i in (1, 2):
            worst = max(worst, float(commutator_residual(s, i, xi).max()))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and dt < 1.0
    acceptance(1, ok, f"max residual {worst:.2e} (tol 1e-12) on 1000 frequencies, {dt:.2f} s (< 1 s)")
    assert ok


def test_criterion_2_nullform_norm(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    n = 10_000
    x1 = rng.standard_normal((n, 2)) * 10 ** rng.uniform(-2, 2, (n, 1))
    x2 = rng.standard_normal((n, 2)) * 10 ** rng.uniform(-2, 2, (n, 1))
    s1 = rng.choice([1, -1], n)
    s2 = rng.choice([1, -1], n)
    got = np.concatenate([projection_product_norm(a, x1[m], b, x2[m])
                          for a in (1, -1) for b in (1, -1) for m in [(s1 == a) & (s2 == b)]])
    u = s1[:, None] * x1 / np.linalg.norm(x1, axis=1, keepdims=True)
    v = -s2[:, None] * x2 / np.linalg.norm(x2, axis=1, keepdims=True)
    order = np.concatenate([np.flatnonzero((s1 == a) & (s2 == b)) for a in (1, -1) for b in (1, -1)])
    # independent closed form: half the arccos angle
    expected = np.sin(0.5 * np.arccos(np.clip((u * v).sum(axis=1), -1, 1)))[order]
    err_formula = float(np.abs(got - expected).max())
    svd = np.concatenate([projection_product_norm_svd(a, x1[m], b, x2[m])
                          for a in (1, -1) for b in (1, -1) for m in [(s1 == a) & (s2 == b)]])
    err_svd = float(np.abs(got - svd).max())
    dt = time.perf_counter() - t0
    # arccos loses accuracy near 0 and pi, so the formula check uses 1e-7; the oracle check is exact
    ok = err_svd <= 1e-12 and err_formula <= 1e-7 and dt < 5.0
    acceptance(2, ok, f"10^4 pairs: |closed form - SVD oracle| {err_svd:.2e} (tol 1e-12), "
                      f"vs arccos form {err_formula:.1e}, {dt:.2f} s (< 5 s)")
    assert ok


def _rk4_oracle(c, m, T, n_steps, grid):
    """Fine-step RK4 for i dc/dt = (alpha.xi + m beta) c, mode by mode."""
    x1, x2 = grid.xi

    def H(v):
        a, b = v
        return np.stack([m * a + (x1 - 1j * x2) * b, (x1 + 1j * x2) * a - m * b])

    f = lambda v: -1j * H(v)
    h = T / n_steps
    for _ in range(n_steps):
        k1 = f(c)
        k2 = f(c + 0.5 * h * k1)
        k3 = f(c + 0.5 * h * k2)
        k4 = f(c + h * k3)
        c = c + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return c


def test_criterion_3_linear_unitarity(acceptance):
    t0 = time.perf_counter()
    g = GridSpec(64, 2 * np.pi)
    rng = np.random.default_rng(3)
    v = rng.standard_normal((2, 64, 64)) + 1j * rng.standard_normal((2, 64, 64))
    psi = SpinorField(g, v)
    hw_err = max(abs(sobolev_norm(half_wave(psi, sg, 0.73), s) / sobolev_norm(psi, s) - 1)
                 for sg in (1, -1) for s in (-0.5, 0.0, 0.5, 1.0))
    q0 = charge(psi)
    lin = linear_flow(psi, 1.0, 1.0)
    q_err = abs(charge(lin) - q0) / q0
    oracle = _rk4_oracle(as_frequency(psi).values, 1.0, 1.0, 4000, g)
    state_err = np.linalg.norm(oracle - as_frequency(lin).values) / np.linalg.norm(oracle)
    oracle_q_err = abs((np.abs(oracle) ** 2).sum() * g.area - q0) / q0
    dt = time.perf_counter() - t0
    ok = hw_err <= 1e-12 and q_err <= 1e-12 and state_err <= 1e-9 and dt < 10
    acceptance(3, ok, f"half_wave H^s drift {hw_err:.1e}, linear_flow Q drift {q_err:.1e} (tol 1e-12); "
                      f"vs RK4 oracle: state {state_err:.1e}, oracle Q drift {oracle_q_err:.1e}; {dt:.1f} s (< 10 s)")
    assert ok


def test_criterion_4_nonlinear_charge(acceptance):
    t0 = time.perf_counter()
    g = GridSpec(128, 4 * np.pi)
    details, ok = [], True
    for m in (0.0, 1.0):
        psi = smooth_random_spinor(g, np.random.default_rng(1), sigma=2.0, amp=1.0)
        finals, drifts = {}, {}
        for ns in (10, 20, 40, 80):
            rec = evolve(psi, EvolutionConfig(m, 1.0, ns))
            finals[ns], drifts[ns] = rec.final, rec.charge_drift
        e = [l2_norm(finals[a] - finals[2 * a]) for a in (10, 20, 40)]
        orders = [np.log2(e[0] / e[1]), np.log2(e[1] / e[2])]
        drift = max(drifts.values())
        good = drift <= 1e-6 and abs(orders[-1] - 4.0) <= 0.3
        ok &= good
        details.append(f"m={m:g}: drift {drift:.1e}, orders {orders[0]:.2f}/{orders[1]:.2f}")
    dt = time.perf_counter() - t0
    ok &= dt < 120
    acceptance(4, ok, "; ".join(details) + f" (tol 1e-6, 4.0 +- 0.3); {dt:.0f} s (< 120 s)")
    assert ok


def test_criterion_5_gauge_consistency(acceptance):
    t0 = time.perf_counter()
    g = GridSpec(32, 2 * np.pi)
    rng = np.random.default_rng(5)
    div = gauss = form = 0.0
    for _ in range(100):
        psi = smooth_random_spinor(g, rng, sigma=rng.uniform(1.5, 4.0), amp=rng.uniform(0.1, 3.0))
        A = gauge_potential(psi)
        div = max(div, float(np.abs(A.divergence().values).max()))
        gauss = max(gauss, cs_gauss_residual(psi, A) / meanfree_charge_density_norm(psi))
        p2, p3 = smooth_random_spinor(g, rng), smooth_random_spinor(g, rng)
        a = nonlinear_term(psi, p2, p3).values
        b = nonlinear_term_gamma_form(psi, p2, p3).values
        form = max(form, float(np.abs(a - b).max() / np.abs(a).max()))
    dt = time.perf_counter() - t0
    ok = div <= 1e-10 and gauss <= 1e-8 and form <= 1e-10 and dt < 30
    acceptance(5, ok, f"100 spinors: div A {div:.1e} (1e-10), Gauss {gauss:.1e} (1e-8), "
                      f"gamma vs alpha {form:.1e} (1e-10); {dt:.1f} s (< 30 s)")
    assert ok


def test_criterion_6_picard(acceptance):
    t0 = time.perf_counter()
    g = GridSpec(64, 2 * np.pi)
    shape = smooth_random_spinor(g, np.random.default_rng(1), sigma=2.0, amp=1.0)
    cfg = EvolutionConfig(1.0, 0.5, 16)
    unit = shape * (1.0 / sobolev_norm(shape, cfg.s))
    threshold = contraction_threshold(shape, cfg, n_iter=6)
    small = 0.5 * threshold
    r_small = picard_sequence(unit * small, cfg, 6).ratios
    # fixed-point agreement, at an amplitude below the discovered threshold
    amp = 1e-3
    psi = unit * amp
    res = picard_sequence(psi, EvolutionConfig(1.0, 0.5, 32), 6)
    ref = evolve(psi, EvolutionConfig(1.0, 0.5, 128)).final
    err = l2_norm(res.iterates_final[-1] - as_frequency(ref))
    rel = err / l2_norm(psi)
    taylor = 0.5**7 / factorial(7)        # first neglected term of the mass series after 6 iterates
    dt = time.perf_counter() - t0
    ok = (max(r_small) <= 0.5 and max(res.ratios) <= 0.5 and amp <= threshold
          and err <= 1e-6 and dt < 120)
    acceptance(6, ok, f"threshold {threshold:.3g} (H^1/4); max q ratio {max(r_small):.3f} at half of it, "
                      f"{max(res.ratios):.3f} at {amp:g}; |psi6 - evolve|_L2 {err:.1e} (tol 1e-6), "
                      f"relative {rel:.2e} vs mass-series remainder {taylor:.2e}; {dt:.0f} s (< 120 s)")
    assert ok


def test_criterion_7_probes(acceptance):
    t0 = time.perf_counter()
    seeds = np.random.SeedSequence(7).spawn(31)
    bil = [bilinear_constant_probe(b, n_trials=20, seed=7, rng=np.random.default_rng(s))
           for b, s in zip(default_bilinear_configs(), seeds[:20])]
    nul = [nullform_constant_probe(b, r, w, n_trials=10, seed=7, rng=np.random.default_rng(s))
           for (b, r, w), s in zip(default_nullform_configs(), seeds[20:30])]
    floor = interaction_floor()
    inter = interaction_probe(100_000, seed=7, rng=np.random.default_rng(seeds[30]), floor=floor)
    dt = time.perf_counter() - t0
    bs = max(r.slack for r in bil)
    ns = max(r.slack for r in nul)
    ok = (len(bil) == 20 and len(nul) == 10 and not any(r.skipped for r in bil + nul)
          and bs <= 10 and ns <= 10 and dt < 300)
    parts = []
    for r in inter:
        ok &= r.measured_min_ratio >= r.theoretical_bound > 0 and r.n_samples == 100_000
        parts.append(f"{r.probe_name} min {r.measured_min_ratio:.4f} >= c0 {r.theoretical_bound:.4f}")
    acceptance(7, ok, f"bilinear max slack {bs:.3f}, null-form max slack {ns:.3f} (<= 10); "
                      + ", ".join(parts) + f"; {dt:.0f} s (< 300 s)")
    assert ok


def test_criterion_8_illposedness(acceptance):
    t0 = time.perf_counter()
    lams = [16, 32, 64, 128]
    neg = lambda_sweep(lams, 0.1, 0.05, -0.5)
    pos = lambda_sweep(lams, 0.1, 0.05, 0.25)
    c1 = min(r.pointwise_min_constant for r in neg.runs + pos.runs)
    cfg = IllposedConfig(16, 0.1, 0.05, -0.5, spacing=4.0, n=64, min_points=2)
    phi = box_data(cfg)
    a = cubic_term(phi, cfg.t).values
    b = cubic_term_oracle(phi, cfg.t).values
    oracle_err = float(np.linalg.norm(a - b) / np.linalg.norm(b))
    dt = time.perf_counter() - t0
    predicted = -2 * (-0.5) - 3 * 0.1
    ok = (abs(neg.slope - predicted) <= 0.25 and neg.slope > 0 and pos.slope < 0
          and c1 > 0 and oracle_err <= 1e-8 and dt < 900)
    acceptance(8, ok, f"slope(s=-1/2) {neg.slope:.3f} (0.7 +- 0.25), slope(s=1/4) {pos.slope:.3f} (< 0), "
                      f"min c1 {c1:.2e} (> 0), oracle rel err {oracle_err:.1e} (1e-8); {dt:.0f} s (< 900 s)")
    assert ok
