"""Shared fixtures: the two benchmark problems and their explicit solutions.

Partitions are expensive, so everything heavyweight is session-scoped.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mpoc import (coupled_two_state_problem, discretize_zoh,
                  enumerate_partition, explore_regions, integrator_problem)
from mpoc.regions import StructureClassifier


# filled by the acceptance tests; echoed after the run so the per-criterion
# verdicts are always visible regardless of output capture
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ex1():
    return integrator_problem()


@pytest.fixture(scope="session")
def ex2():
    return coupled_two_state_problem()


@pytest.fixture(scope="session")
def ex1_regions(ex1):
    return explore_regions(ex1)


@pytest.fixture(scope="session")
def ex2_classifier(ex2):
    return StructureClassifier(ex2)


@pytest.fixture(scope="session")
def ex2_regions(ex2, ex2_classifier):
    return explore_regions(ex2, classifier=ex2_classifier)


@pytest.fixture(scope="session")
def ex1_dt_partitions(ex1):
    out = {}
    for N in (5, 10, 15, 30):
        out[N] = enumerate_partition(discretize_zoh(ex1, N))
    return out


@pytest.fixture(scope="session")
def ex2_dt_partitions(ex2):
    out = {}
    for N in (5, 8, 12, 20):
        out[N] = enumerate_partition(discretize_zoh(ex2, N), grid=15)
    return out
