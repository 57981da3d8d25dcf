import pytest

from mimcavity.spectral import CavityConfig
from mimcavity.units import UnitSystem

NATURAL = UnitSystem(c=1.0, hbar=1.0)


@pytest.fixture
def natural():
    return NATURAL


@pytest.fixture
def reference_cavity():
    """6 cm cavity, n = 2.2, 50 nm membrane at the centre (SI)."""
    return CavityConfig.from_index(0.06, 50e-9, 2.2)


@pytest.fixture
def desk_sheet():
    """Scaled thin-sheet cavity (l = 1, c = hbar = 1)."""
    return CavityConfig(1.0, 0.01, 3.0, surrogate=True, units=NATURAL)


@pytest.fixture
def desk_slab():
    return CavityConfig(1.0, 0.01, 3.0, units=NATURAL)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
