import numpy as np
import pytest

from lelab.grid import Grid
from lelab.presets import random_scalar, random_vector


@pytest.fixture(scope="session")
def grid():
    return Grid(16, 16, 17)


@pytest.fixture(scope="session")
def fine_grid():
    return Grid(32, 32, 33)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_field(grid, rng):
    return lambda: random_scalar(grid, rng)


@pytest.fixture
def random_vfield(grid, rng):
    return lambda: random_vector(grid, rng)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_RESULTS

    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
