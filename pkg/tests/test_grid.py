import numpy as np
import pytest

from csdlab.errors import GridMismatchError, RepresentationError
from csdlab.grid import (FREQUENCY, GridSpec, ScalarField, SpinorField, dyadic_of, from_fourier,
                         l2_norm, sobolev_norm, to_fourier, top_shell_fraction)
from csdlab.multipliers import shell_mask

from conftest import random_scalar, random_spinor, single_mode


@pytest.mark.parametrize("n", [0, 6, 12, 4])
def test_gridspec_rejects_bad_n(n):
    with pytest.raises(ValueError):
        GridSpec(n, 1.0)


def test_gridspec_rejects_bad_width_and_time():
    with pytest.raises(ValueError):
        GridSpec(16, 0.0)
    with pytest.raises(ValueError):
        GridSpec(16, 1.0, n_t=1)
    with pytest.raises(ValueError):
        GridSpec(16, 1.0, t_span=(1.0, 1.0))


def test_frequency_index_bijection(grid32):
    seen = set()
    for k1 in range(-16, 16):
        for k2 in (-16, -3, 0, 15):
            xi = grid32.frequency_of_index(k1, k2)
            assert grid32.index_of_frequency(*xi) == (k1, k2)
            seen.add(xi)
    assert len(seen) == 32 * 4
    with pytest.raises(IndexError):
        grid32.frequency_of_index(16, 0)
    with pytest.raises(ValueError):
        grid32.index_of_frequency(0.3, 0.0)


def test_with_spacing():
    g = GridSpec.with_spacing(64, 0.25)
    assert g.dxi == pytest.approx(0.25)
    assert g.xi[0][1, 0] == pytest.approx(0.25)


def test_delta_has_flat_spectrum(grid32):
    v = np.zeros(grid32.shape, complex)
    v[0, 0] = 1.0
    c = to_fourier(ScalarField(grid32, v)).values
    assert np.allclose(c, 1.0 / grid32.n**2, rtol=0, atol=1e-15)


def test_plane_wave_is_single_mode(grid32):
    x1, x2 = grid32.x
    k = (3, -5)
    xi = grid32.frequency_of_index(*k)
    f = ScalarField(grid32, np.exp(1j * (xi[0] * x1 + xi[1] * x2)))
    c = to_fourier(f).values
    i, j = grid32.array_index(*k)
    assert abs(c[i, j] - 1) < 1e-12
    c[i, j] = 0
    assert np.abs(c).max() < 1e-12


def test_single_mode_has_unit_modulus(grid32):
    f = single_mode(grid32, 2, 7)
    assert np.allclose(np.abs(f.values), 1.0, atol=1e-13)


def test_roundtrip_and_parseval(grid32, rng):
    f = random_scalar(grid32, rng)
    F = to_fourier(f)
    back = from_fourier(F)
    assert np.abs(back.values - f.values).max() / np.abs(f.values).max() < 1e-12
    assert l2_norm(F) == pytest.approx(l2_norm(f), rel=1e-12)
    psi = random_spinor(grid32, rng)
    assert l2_norm(to_fourier(psi)) == pytest.approx(l2_norm(psi), rel=1e-12)


def test_zero_field_roundtrip(grid32):
    z = ScalarField(grid32, np.zeros(grid32.shape), FREQUENCY)
    assert not from_fourier(z).values.any()


def test_representation_errors(grid32, rng):
    f = random_scalar(grid32, rng)
    with pytest.raises(RepresentationError):
        from_fourier(f)
    with pytest.raises(RepresentationError):
        to_fourier(to_fourier(f))
    with pytest.raises(RepresentationError):
        ScalarField(grid32, f.values, "momentum")


def test_grid_mismatch(grid32, rng):
    other = GridSpec(32, 3.0)
    with pytest.raises(GridMismatchError):
        random_scalar(grid32, rng) + random_scalar(other, rng)
    with pytest.raises(GridMismatchError):
        SpinorField(grid32, np.zeros((3, 32, 32)))


def test_dyadic_labels_exact_at_powers_of_two():
    r = np.array([0.0, 1.99, 2.0, 3.999, 4.0, 7.5, 8.0, 1024.0])
    assert dyadic_of(r).tolist() == [1, 1, 2, 2, 4, 4, 8, 1024]


def test_sobolev_s0_is_l2(grid32, rng):
    psi = random_spinor(grid32, rng)
    assert sobolev_norm(psi, 0.0) == pytest.approx(l2_norm(psi), rel=1e-13)


@pytest.mark.parametrize("s", [0.25, 0.5, 1.0])
def test_sobolev_on_single_shell(s, rng):
    g = GridSpec(64, 4 * np.pi)          # spacing 1/4
    c = (rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)) * shell_mask(g, 4)
    f = ScalarField(g, c, FREQUENCY)
    f = f * (1.0 / l2_norm(f))
    v = sobolev_norm(f, s)
    assert 4**s - 1e-12 <= v <= 8**s


def test_top_shell_fraction(grid32):
    assert top_shell_fraction(single_mode(grid32, 0, 1, comps=(1, 0))) == 0.0
    assert top_shell_fraction(single_mode(grid32, 12, 12, comps=(1, 0))) == pytest.approx(1.0)
