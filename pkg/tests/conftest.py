import numpy as np
import pytest

from csdlab.grid import FREQUENCY, GridSpec, ScalarField, SpinorField, as_position


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spinor(grid, rng, rep="position"):
    v = rng.standard_normal((2, grid.n, grid.n)) + 1j * rng.standard_normal((2, grid.n, grid.n))
    return SpinorField(grid, v, rep)


def random_scalar(grid, rng, rep="position"):
    v = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return ScalarField(grid, v, rep)


def single_mode(grid, k1, k2, amp=1.0, comps=None):
    """Field with one Fourier coefficient at lattice index (k1, k2)."""
    i, j = grid.array_index(k1, k2)
    if comps is None:
        c = np.zeros(grid.shape, complex)
        c[i, j] = amp
        return as_position(ScalarField(grid, c, FREQUENCY))
    c = np.zeros((2, *grid.shape), complex)
    c[:, i, j] = np.asarray(comps) * amp
    return as_position(SpinorField(grid, c, FREQUENCY))


def constant_spinor(grid, a, b):
    return SpinorField(grid, np.stack([np.full(grid.shape, a, complex), np.full(grid.shape, b, complex)]))


@pytest.fixture
def grid32():
    return GridSpec(32, 2 * np.pi)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion (printed in the terminal summary)."""
    def record(number, ok, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
