import math

import numpy as np
import pytest
from hypothesis import settings

from hallmhd.initial import random_solenoidal_field, random_solenoidal_state
from hallmhd.spectral import GridSpec

settings.register_profile("default", max_examples=25, deadline=None)
settings.load_profile("default")


@pytest.fixture
def grid16():
    return GridSpec(16, 2 * math.pi)


@pytest.fixture
def grid32():
    return GridSpec(32, 2 * math.pi)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_field(grid16, rng):
    return random_solenoidal_field(grid16, rng)


@pytest.fixture
def random_state(grid16, rng):
    return random_solenoidal_state(grid16, rng)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance table after the test report, one line per criterion."""
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("#")[1].split()[0])):
            terminalreporter.write_line(line)
