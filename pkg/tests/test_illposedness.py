import csv

import numpy as np
import pytest

from csdlab.errors import ConfigError, DomainError
from csdlab.grid import FREQUENCY, SpinorField, l2_norm, sobolev_norm
from csdlab.illposedness import (IllposedConfig, SweepResult, box_data, continuum_transform, converged_cubic_term,
                                 cubic_term, cubic_term_path, fit_slope, illposed_run, lambda_sweep,
                                 pointwise_constant, pointwise_lower_bound, simpson_weights,
                                 target_regions)


@pytest.fixture(scope="module")
def small_cfg():
    return IllposedConfig(16, 0.25, 0.05, -0.5, spacing=1.0)


@pytest.fixture(scope="module")
def small_run(small_cfg):
    return illposed_run(small_cfg)


def test_config_validation():
    with pytest.raises(ConfigError, match="lam"):
        IllposedConfig(24, 0.1, 0.05, -0.5)
    with pytest.raises(ConfigError) as e:
        IllposedConfig(16, 1.5, 0.0, -0.5)
    assert len(e.value.errors) == 2
    with pytest.raises(ConfigError, match="n_quad"):
        IllposedConfig(16, 0.1, 0.05, -0.5, n_quad=4)
    with pytest.raises(ConfigError, match="clipped"):
        IllposedConfig(16, 0.1, 0.05, -0.5, n=64)
    with pytest.raises(ConfigError, match="lattice points"):
        IllposedConfig(16, 0.1, 0.05, -0.5, spacing=4.0, n=64)


def test_derived_scales():
    cfg = IllposedConfig(64, 0.1, 0.05, -0.5)
    assert cfg.mu == pytest.approx(64**0.9)
    assert cfg.t == pytest.approx(0.05 * 64**-1.1)
    assert cfg.center_index * cfg.h == pytest.approx(64)
    assert cfg.half_width_index >= 8


def test_box_support_on_unit_lattice(small_cfg):
    assert small_cfg.mu == pytest.approx(8.0)
    phi = box_data(small_cfg)
    g = phi.grid
    assert g.dxi == pytest.approx(1.0)
    F = continuum_transform(phi)
    idx = np.argwhere(np.abs(F[0]) > 0)
    k = g.indices[idx]
    assert len(idx) == 17 * 17
    assert k[:, 0].min() == 8 and k[:, 0].max() == 24
    assert k[:, 1].min() == -8 and k[:, 1].max() == 8
    assert np.allclose(F[np.abs(F) > 0], 1.0)


def test_box_norm_and_mirror(small_cfg):
    phi = box_data(small_cfg)
    g = phi.grid
    count = 17 * 17
    assert l2_norm(phi) == pytest.approx(np.sqrt(2 * count / g.area), rel=1e-12)
    c = phi.values
    mirror = c[0][(-g.indices) % g.n, :]
    assert np.array_equal(c[1], mirror)


@pytest.mark.parametrize("lam, eps, s", [(16, 0.1, -0.5), (32, 0.1, 0.25), (64, 0.2, -0.5)])
def test_box_sobolev_scaling(lam, eps, s):
    cfg = IllposedConfig(lam, eps, 0.05, s)
    ratio = sobolev_norm(box_data(cfg), s) / (cfg.mu * cfg.lam**s)
    assert 0.25 <= ratio <= 4


def test_simpson_weights():
    w = simpson_weights(5, 2.0)
    assert w.sum() == pytest.approx(2.0)
    t = np.linspace(0, 2.0, 5)
    assert (w * t**3).sum() == pytest.approx(4.0)
    with pytest.raises(ValueError):
        simpson_weights(4, 1.0)


def test_cubic_term_zero(small_cfg):
    z = SpinorField.zeros(small_cfg.grid, FREQUENCY)
    assert not cubic_term(z, small_cfg.t).values.any()
    with pytest.raises(DomainError):
        cubic_term(z, 0.0)


def test_cubic_term_linear_in_t(small_cfg):
    phi = box_data(small_cfg)
    ts = np.geomspace(1e-4, 1e-2, 5) / small_cfg.lam
    norms = [l2_norm(cubic_term(phi, t, n_quad=5)) for t in ts]
    slope = np.polyfit(np.log(ts), np.log(norms), 1)[0]
    assert abs(slope - 1) <= 0.05


def test_factorized_matches_explicit_sign_sum():
    cfg = IllposedConfig(16, 0.1, 0.05, -0.5, spacing=4.0, n=64, min_points=2)
    phi = box_data(cfg)
    a = cubic_term(phi, cfg.t, n_quad=5).values
    b = cubic_term(phi, cfg.t, n_quad=5, explicit=True).values
    assert np.abs(a - b).max() <= 1e-12 * np.abs(a).max()


def test_path_endpoint_matches_single_call(small_cfg):
    phi = box_data(small_cfg)
    path = cubic_term_path(phi, small_cfg.t, n_quad=5, n_times=2)
    one = cubic_term(phi, small_cfg.t, n_quad=9)
    assert np.abs(path[-1].values - one.values).max() <= 1e-12 * np.abs(one.values).max()


def test_converged_cubic_term(small_cfg):
    phi = box_data(small_cfg)
    L, nq = converged_cubic_term(phi, small_cfg.t, -0.5, n_quad=3, rtol=1e-8)
    assert nq >= 5
    assert sobolev_norm(L, -0.5) > 0


def test_output_support_inside_target_regions(small_cfg):
    phi = box_data(small_cfg)
    F = np.abs(continuum_transform(cubic_term(phi, small_cfg.t))).sum(axis=0)
    inside = np.logical_or.reduce(target_regions(small_cfg))
    assert F[~inside].max() <= 1e-12 * F.max()


def test_pointwise_constant_positive_and_delta_stable():
    c1 = pointwise_lower_bound(IllposedConfig(16, 0.25, 0.05, -0.5))
    c2 = pointwise_lower_bound(IllposedConfig(16, 0.25, 0.025, -0.5))
    assert c1 > 0 and c2 > 0
    assert abs(c2 / c1 - 1) <= 0.2


def test_pointwise_constant_on_unit_lattice(small_cfg):
    phi = box_data(small_cfg)
    L = cubic_term(phi, small_cfg.t)
    assert pointwise_constant(small_cfg, L) > 0


def test_run_fields(small_cfg, small_run):
    r = small_run
    assert len(r.L_norms) == small_cfg.n_times
    assert r.sup_t_L_hs_norm == max(r.L_norms)
    assert r.ratio == pytest.approx(r.sup_t_L_hs_norm / r.phi_hs_norm**3)


def test_fit_slope_exact_power_law():
    lams = [16, 32, 64, 128]
    slope, b, res = fit_slope(lams, [3.0 * l**0.7 for l in lams])
    assert slope == pytest.approx(0.7, abs=1e-12)
    assert res < 1e-12


def test_sweep_needs_four_lambdas():
    with pytest.raises(ValueError):
        lambda_sweep([16, 32, 64], 0.1, 0.05, -0.5)


def test_sweep_csv_footer(tmp_path, small_run):
    sw = SweepResult(0.7, 0.1, 0.01, [small_run, small_run])
    p = tmp_path / "s.csv"
    sw.write_csv(p)
    rows = list(csv.reader(open(p)))
    assert rows[0] == ["lambda", "mu", "t", "phi_hs", "L_hs", "ratio", "c1"]
    assert len(rows) == 4 and float(rows[1][5]) == small_run.ratio
    assert rows[-1][:4] == ["slope", "0.7", "residual", "0.01"]
