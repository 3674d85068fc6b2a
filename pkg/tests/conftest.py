import math

import numpy as np
import pytest

from vrlab.evolution import gaussian_profile, standard_window
from vrlab.fields import VorticityField

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def small_window():
    """[-8, 8]^2 with 48 cells per side."""
    return standard_window(48, 8.0)


@pytest.fixture(scope="session")
def gauss_small(small_window):
    return VorticityField(small_window, gaussian_profile(small_window))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def lamb_oseen_speed(rho: float) -> float:
    """Azimuthal speed of the planar Gaussian G at distance rho."""
    return (1.0 - math.exp(-(rho**2) / 4.0)) / (2.0 * math.pi * rho)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
