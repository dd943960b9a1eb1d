import numpy as np
import pytest

from actuator_opt import Intervals1D, assemble_fem_1d, project_initial_condition


@pytest.fixture(scope="session")
def heat1d():
    """1D reference system: 200 elements, sigma = 0.01."""
    return assemble_fem_1d(200, 0.01)


@pytest.fixture(scope="session")
def sine_ic(heat1d):
    return project_initial_condition(lambda x: np.sin(np.pi * x), heat1d)


@pytest.fixture(scope="session")
def centred():
    return Intervals1D(((0.4, 0.6),))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
