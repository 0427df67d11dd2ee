import numpy as np
import pytest

from gsaudit.hermite import SpectralFunction

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_expansion(seed: int, degree: int, dim: int = 1) -> SpectralFunction:
    """Seeded random expansion with unit L2 norm."""
    rng = np.random.default_rng(seed)
    shape = (degree + 1,) if dim == 1 else (degree + 1, degree + 1)
    c = rng.standard_normal(shape)
    return SpectralFunction(c / np.linalg.norm(c))


@pytest.fixture
def rng():
    return np.random.default_rng(20230817)
