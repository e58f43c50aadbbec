import warnings

import pytest
from hypothesis import HealthCheck, settings

from gnsflow.constants import derive_params, params_from_m
from gnsflow.errors import TruncationWarning
from gnsflow.profiles import grid_for

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# filled by test_acceptance so the summary can print the table
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(autouse=True)
def _quiet_truncation():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        yield


@pytest.fixture(scope="session")
def p22():
    return derive_params(2, 2, "M*")


@pytest.fixture(scope="session")
def m34():
    return params_from_m(2, 0.75, "M*")


@pytest.fixture(scope="session")
def grid22(p22):
    return grid_for(p22, p22.mass, 1.0, n=2000)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
