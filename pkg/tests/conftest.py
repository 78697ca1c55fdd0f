import numpy as np
import pytest

from martdim.paths import generate_brownian, make_grid


@pytest.fixture(scope="session")
def grid():
    return make_grid(1.0, 256)


@pytest.fixture(scope="session")
def Z2(grid):
    """Small 2-dimensional driver shared by the exact-identity tests."""
    return generate_brownian(grid, 2, 64, seed=11)


@pytest.fixture(scope="session")
def Z3(grid):
    return generate_brownian(grid, 3, 48, seed=12)


@pytest.fixture(scope="session")
def Zstat():
    """Driver large enough for 3-sigma statistical checks."""
    return generate_brownian(make_grid(1.0, 512), 2, 2000, seed=2024)


def zscore(samples, expected):
    x = np.asarray(samples, dtype=float).ravel()
    return (x.mean() - expected) / (x.std(ddof=1) / np.sqrt(x.size))


# acceptance criteria register one line each; printed after the run regardless of capture
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
