import numpy as np
import pytest

from quinpi.core import make_grid, make_problem, project_initial_condition


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def burgers():
    return make_problem("burgers", "sine-smooth")


@pytest.fixture
def advection():
    return make_problem("advection", "sine-jump")


def state_for(problem, n):
    grid = make_grid(problem.x_min, problem.x_max, n)
    return project_initial_condition(grid, problem.initial_condition)


# one PASS/FAIL line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
