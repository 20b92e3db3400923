import numpy as np
import pytest

from convexify.geometry import GridSpec, build_domain
from convexify.model import CoefficientSet


@pytest.fixture(scope="session")
def spec1d():
    return GridSpec(n_x1=41, n_t=41)


@pytest.fixture(scope="session")
def grid1d(spec1d):
    return build_domain(spec1d)


@pytest.fixture(scope="session")
def coeffs1d(grid1d):
    return CoefficientSet.from_functions(grid1d.space_axes, f=lambda x: 2.0 + np.sin(x))


@pytest.fixture(scope="session")
def grid2d():
    return build_domain(GridSpec(n_space=2, n_x1=11, n_xbar=9, n_t=11))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
