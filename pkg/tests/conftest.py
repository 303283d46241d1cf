import numpy as np
import pytest

from sasregime.data import Dataset


def make_dataset(n=60, p=4, seed=0, effect=None, noise=0.3):
    """Small randomized dataset; ``effect`` maps column -> interaction coefficient."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    A = rng.integers(0, 2, n)
    A[:2] = (0, 1)
    c = 0.2 + sum(b * X[:, j] for j, b in (effect or {}).items())
    Y = 1.0 + X[:, 0] + A * c + noise * rng.standard_normal(n)
    return Dataset(X, A, Y)


@pytest.fixture
def small():
    return make_dataset(effect={0: 1.0, 2: -0.8})


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
