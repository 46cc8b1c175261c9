import math

import pytest
from hypothesis import HealthCheck, settings

from dirac_minmax import C_CODATA, Component, PotentialSpec, RadialFunction

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def c():
    return C_CODATA


@pytest.fixture
def pot1():
    return PotentialSpec(1.0)


@pytest.fixture
def s1():
    """Normalized 1s Slater, zeta = 1, kappa = -1."""
    return Component(RadialFunction.normalized_slater(0.0, 1.0), -1)


def exact_shift(Z: float, c: float = C_CODATA) -> float:
    g = math.sqrt(1.0 - (Z / c) ** 2)
    return -Z * Z / (1.0 + g)
