import numpy as np
import pytest

from covert_ncs.lti import TransferFunction
from covert_ncs.netsim import NcsModel

C_TRUE = (0.1701, -0.1673)
G_TRUE = (0.3379, 0.2793, -1.5462, 0.5646)


@pytest.fixture
def controller():
    return TransferFunction(list(C_TRUE), [1.0, -1.0])


@pytest.fixture
def plant():
    return TransferFunction(list(G_TRUE[:2]), [1.0, *G_TRUE[2:]])


@pytest.fixture
def model():
    return NcsModel()


def step(n):
    return np.ones(n)


# Lines recorded by the acceptance suite, echoed in the terminal summary so
# they survive output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
