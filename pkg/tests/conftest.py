import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from zigzag.crystal import TrapPotential

settings.register_profile("repo", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

TWO_PI = 2 * math.pi
ACCEPTANCE_LINES = []


def mhz(f):
    return TWO_PI * f * 1e6


@pytest.fixture
def three_ion_trap():
    """omega_x inferred from a 350 kHz soft mode at alpha = 0.40."""
    return TrapPotential.from_alpha(mhz(1.75), 0.42, mhz(2.9))


@pytest.fixture
def planar_trap():
    return TrapPotential.from_alpha(mhz(1.7), 0.5, mhz(2.9))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
