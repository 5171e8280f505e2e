import numpy as np
import pytest
from hypothesis import settings

from hmmforget.model import build_model
from hmmforget.perturb2 import build_perturb, to_hmm

settings.register_profile("default", max_examples=40, deadline=None, derandomize=True)
settings.load_profile("default")

P_TEST = [[0.9, 0.1], [0.2, 0.8]]
Q_TEST = [[0.9, 0.1], [0.1, 0.9]]


@pytest.fixture(scope="session")
def test_model():
    return build_model(P_TEST, Q_TEST)


@pytest.fixture(scope="session")
def uniform_model():
    return build_model(P_TEST, [[0.5, 0.5], [0.5, 0.5]])


@pytest.fixture(scope="session")
def binary_model():
    return to_hmm(build_perturb(0.9, 0.2, 0.1))


@pytest.fixture(scope="session")
def three_state_model():
    p = np.array([[0.6, 0.3, 0.1], [0.2, 0.5, 0.3], [0.25, 0.25, 0.5]])
    q = np.array([[0.7, 0.2, 0.1], [0.1, 0.8, 0.1], [0.2, 0.2, 0.6]])
    return build_model(p, q)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
