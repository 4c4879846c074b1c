import numpy as np
import pytest

from htype.clifford import build_generators
from htype.groups import HTypeGroup

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def h1():
    return HTypeGroup(build_generators(1, 1))


@pytest.fixture(scope="session")
def k2():
    return HTypeGroup(build_generators(2, 1))


@pytest.fixture(scope="session")
def k3():
    return HTypeGroup(build_generators(3, 1))


@pytest.fixture(scope="session")
def h2():
    """Heisenberg group with a 4-dimensional horizontal space."""
    return HTypeGroup(build_generators(1, 2))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
