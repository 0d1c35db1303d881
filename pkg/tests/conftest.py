import sys
from pathlib import Path

import numpy as np
import pytest

from lqrtransfer.lti import random_model

SUITE_SEED = 20240
SUITE_SIZE = 50

ACCEPTANCE_LINES: list = []


def random_suite(size: int = SUITE_SIZE, seed: int = SUITE_SEED):
    """Random minimal systems with n in 2..5 and m, l in 1..3."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(size):
        n = int(rng.integers(2, 6))
        m = int(rng.integers(1, 4))
        l = int(rng.integers(1, 4))
        out.append(random_model(rng, n, m, l))
    return out


@pytest.fixture(scope="session")
def suite():
    return random_suite()


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


sys.path.insert(0, str(Path(__file__).parent))
