import numpy as np
import pytest

from fourierext.problems import PoissonConfig, run_poisson

ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def poisson_runs():
    """Default-parameter catenoid solves at ns = 20 and 40 (about a minute)."""
    return {ns: run_poisson(PoissonConfig(ns=ns)) for ns in (20, 40)}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
