import numpy as np
import pytest

from proattn import Penalty, WeightedPoints

ALL_PENALTIES = [
    Penalty("l2"),
    Penalty("l1"),
    Penalty("huber", delta=1.0),
    Penalty("mcp", gamma=4.0),
    Penalty("huber_mcp", delta=1.0, gamma=4.0),
]

TRAJ_V = np.array([[1.0, 2.0], [7.0, 25.0], [25.0, 37.0]])


def softmax(x):
    e = np.exp(x - x.max())
    return e / e.sum()


def random_instance(seed, N=None, D=None):
    """Unit-Gaussian values with softmax-normalised random weights."""
    rng = np.random.default_rng(seed)
    N = N if N is not None else int(rng.integers(2, 65))
    D = D if D is not None else int(rng.integers(1, 17))
    values = rng.standard_normal((N, D))
    weights = softmax(rng.standard_normal(N))
    return WeightedPoints(values, weights), rng


def central_difference(f, z, h=1e-6):
    return (f(z + h) - f(z - h)) / (2 * h)


@pytest.fixture(params=ALL_PENALTIES, ids=lambda p: p.kind)
def penalty(request):
    return request.param


# acceptance summary lines, filled by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
