import numpy as np
import pytest

from dtf.core import CategoricalDataset


def random_dataset(rng: np.random.Generator, d: int, cards, n: int, coupling: float = 0.6):
    """Random categorical data with some dependence between neighbouring columns."""
    cards = tuple(int(k) for k in cards)
    cols = [rng.integers(0, k, size=n) for k in cards]
    for j in range(1, d):
        tie = rng.random(n) < coupling
        cols[j] = np.where(tie, (cols[j - 1] + j) % cards[j], cols[j])
    return CategoricalDataset(np.stack(cols, axis=1), cards)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# lines collected by test_acceptance.py, shown after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
