import numpy as np
import pytest

from burgerslab.entropy_core import EntropySolution
from burgerslab.initial import InitialVelocity


def two_dip(a):
    return -np.tanh((a + 1.0) / 0.5) - np.tanh((a - 1.0) / 0.8)


@pytest.fixture(scope="session")
def riemann():
    return EntropySolution(InitialVelocity.riemann(1.0, -1.0))


@pytest.fixture(scope="session")
def ramp():
    return EntropySolution(InitialVelocity.linear_ramp(-1.0))


@pytest.fixture(scope="session")
def sawtooth():
    return EntropySolution(InitialVelocity.sawtooth(1.0, 0.5))


@pytest.fixture(scope="session")
def twodip():
    return EntropySolution(InitialVelocity.from_function(two_dip, -8.0, 8.0, 1601), 0.0, 2.5)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
