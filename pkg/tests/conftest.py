import math
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nsgls import field as fld
from nsgls import solver, verify

settings.register_profile("nsgls", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("nsgls")


@pytest.fixture(scope="session")
def small_data_config():
    return verify.small_data_config()


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def acceptance_lines():
    return ACCEPTANCE_LINES


@pytest.fixture(scope="session")
def small_data_timing():
    return {}


@pytest.fixture(scope="session")
def small_data_run(small_data_config, small_data_timing):
    """Desk-scale small-data trajectory shared by the theorem checks (about 20 s)."""
    start = time.perf_counter()
    res = solver.run(small_data_config)
    small_data_timing["run_seconds"] = time.perf_counter() - start
    return res


@pytest.fixture
def grid3():
    return fld.Grid(3, 16, 2.0 * math.pi)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
