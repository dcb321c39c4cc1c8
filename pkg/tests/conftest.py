import numpy as np
import pytest

from isqlimits import ModelSpec
from isqlimits.verify import one_state_model


P2 = np.array([[0.3, 0.7], [0.6, 0.4]])


@pytest.fixture
def two_state():
    return ModelSpec(1, 1, 1.0, P2, 0.5)


@pytest.fixture
def one_state():
    return one_state_model()


@pytest.fixture
def four_state():
    # two queues, batches in {0,1}^2
    P = np.array(
        [
            [0.1, 0.4, 0.3, 0.2],
            [0.5, 0.1, 0.2, 0.2],
            [0.3, 0.3, 0.2, 0.2],
            [0.25, 0.25, 0.25, 0.25],
        ]
    )
    return ModelSpec(2, 1, 1.5, P, 0.4)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in mod.REPORT:
            terminalreporter.write_line(line)
