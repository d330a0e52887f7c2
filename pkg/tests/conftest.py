import numpy as np
import pytest

from jkoflow.spectral import ScalarField, TorusGrid


def gaussian_bump(grid, width, center=None):
    coords = grid.coordinates()
    center = center or (grid.box_length / 2.0,) * grid.dim
    r2 = sum((x - c) ** 2 for x, c in zip(coords, center))
    v = np.exp(-r2 / (2.0 * width ** 2))
    return ScalarField(grid, v / (v.sum() * grid.cell_volume))


def random_mean_zero(grid, rng):
    v = rng.standard_normal(grid.shape)
    return ScalarField(grid, v - v.mean())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid1d():
    return TorusGrid(1, 64, 8.0)


@pytest.fixture
def grid2d():
    return TorusGrid(2, 16, 4.0)


# One summary line per acceptance criterion, printed at the end of the run.
ACCEPTANCE_LINES = []


def record_criterion(label, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
