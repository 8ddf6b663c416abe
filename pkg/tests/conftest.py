import random

import pytest
from hypothesis import HealthCheck, settings

from f0sketch import sketch as sk
from f0sketch.params import derive_params, with_constants

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_params():
    """64 bins, 10 rows: fast enough for property tests."""
    return derive_params(2**12, 0.5, 0.2, c6_practical=16)


@pytest.fixture(scope="session")
def tight_params(small_params):
    """Same shape with a space budget small enough that q moves."""
    return with_constants(small_params, c5_space=1)


@pytest.fixture(scope="session")
def small_seed(small_params):
    return sk.init(small_params, random.Random(11))


@pytest.fixture(scope="session")
def tight_seed(tight_params):
    return sk.init(tight_params, random.Random(12))


@pytest.fixture(scope="session")
def accept_params():
    return derive_params(2**20, 0.25, 0.2)


# one line per acceptance criterion, repeated at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
