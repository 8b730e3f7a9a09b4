import numpy as np
import pytest

from twistlab.oscillator import Line1DGrid
from twistlab.transverse import (CrossSectionSpec, build_cross_section, coupling_matrices,
                                 solve_dirichlet_modes)
from twistlab.twist import make_profile


@pytest.fixture(scope="session")
def rect_grid():
    return build_cross_section(CrossSectionSpec.rectangle(1.0, 0.5, resolution=80))


@pytest.fixture(scope="session")
def rect_modes(rect_grid):
    return solve_dirichlet_modes(rect_grid, 6)


@pytest.fixture(scope="session")
def rect_coupling(rect_modes, rect_grid):
    return coupling_matrices(rect_modes, rect_grid)


@pytest.fixture(scope="session")
def bump():
    return make_profile("bump", {"amplitude": 1.0})


@pytest.fixture(scope="session")
def line_grid():
    return Line1DGrid(12.0, 1201)


@pytest.fixture(scope="session")
def fine_line_grid():
    # Resolves the bump support for eps >= 0.1.
    return Line1DGrid(12.0, 2405)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
