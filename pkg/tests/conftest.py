import math
from pathlib import Path

import pytest

from bowenlab.cocycle import Repeller
from bowenlab.models import diagonal_torus, doubling
from bowenlab.symbolic import golden_mean_shift

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
LOG_PHI = math.log((1 + math.sqrt(5)) / 2)
GOLDEN_DIM = LOG_PHI / math.log(2)

ACCEPTANCE_LINES = []


@pytest.fixture
def configs():
    return CONFIGS


@pytest.fixture
def dbl():
    return Repeller.full(doubling())


@pytest.fixture
def diag23():
    return Repeller.full(diagonal_torus(2, 3))


@pytest.fixture
def golden():
    return Repeller(doubling(), golden_mean_shift())


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
