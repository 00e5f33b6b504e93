import numpy as np
import pytest

from cslr.data import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_linear_toy(n, d, rng, relevant=2, noise=0.0):
    """Standard-normal attributes, labels from the sign of the first ``relevant``
    coordinates' sum plus optional label-space noise."""
    X = rng.standard_normal((n, d))
    w = np.zeros(d)
    w[:relevant] = 1.0
    f = X @ w + noise * rng.standard_normal(n)
    return Dataset(X, (f > 0).astype(int)), w != 0


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.VERDICTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
