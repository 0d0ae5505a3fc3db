import numpy as np
import pytest

from pwmstab.corpus import corpus_case
from pwmstab.orbit import find_periodic_orbit


@pytest.fixture(scope="session")
def buck():
    """Ideal buck with a small ramp: the stable reference configuration."""
    model, rule = corpus_case("buck-ideal-ramp")
    return model, rule, find_periodic_orbit(model, rule)


@pytest.fixture(scope="session")
def boost():
    model, rule = corpus_case("boost-ideal-ramp")
    return model, rule, find_periodic_orbit(model, rule)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


@pytest.fixture
def report_criterion():
    """Record one summary line per acceptance criterion."""

    def record(number, passed, detail):
        ACCEPTANCE_LINES.append((number, f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"))

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
