import numpy as np
import pytest

from hdrda import LabeledDataset

_CRITERIA = []


def random_instance(rng, p=None, n=None, k=None, n_test=12):
    """Random Gaussian classes with distinct means and spreads.

    Every class gets at least two training rows. Test rows come from the same
    populations.
    """
    k = int(rng.integers(2, 5)) if k is None else k
    p = int(rng.integers(5, 51)) if p is None else p
    n = int(rng.integers(max(6, 2 * k), 31)) if n is None else n
    y = np.concatenate([np.arange(k), np.arange(k), rng.integers(0, k, n - 2 * k)])
    centers = rng.normal(size=(k, p))
    spread = rng.uniform(0.5, 2.0, size=k)
    x = centers[y] + rng.normal(size=(n, p)) * spread[y, None]
    yt = rng.integers(0, k, n_test)
    xt = centers[yt] + rng.normal(size=(n_test, p)) * spread[yt, None]
    return LabeledDataset.from_labels(x, y), xt


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def two_class_2d():
    # class 1 = {(0,0),(2,0)}, class 2 = {(0,0),(0,2)}
    x = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 0.0], [0.0, 2.0]])
    return LabeledDataset.from_labels(x, [1, 1, 2, 2])


@pytest.fixture
def separated(rng):
    """Two tight, far-apart clusters in p=10."""
    x = np.vstack([rng.normal(0.0, 1.0, (20, 10)), rng.normal(8.0, 1.0, (20, 10))])
    return LabeledDataset.from_labels(x, ["a"] * 20 + ["b"] * 20)


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion."""
    def record(label, ok, detail):
        _CRITERIA.append(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
