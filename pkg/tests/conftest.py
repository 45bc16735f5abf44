import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nevlab.catalog import build_map, get_surface

settings.register_profile("nevlab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("nevlab")


@pytest.fixture(scope="session")
def plane():
    return get_surface("euclidean-plane")


@pytest.fixture(scope="session")
def flat_disc():
    return get_surface("euclidean-disc")


@pytest.fixture(scope="session")
def poincare():
    return get_surface("poincare-disc")


@pytest.fixture(scope="session")
def identity_map():
    return build_map("rational{num:[1,0],den:[1]}")


@pytest.fixture(scope="session")
def exp_map():
    return build_map("exp")


def half_log(x):
    return 0.5 * math.log(x)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
