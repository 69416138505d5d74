import sys
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from aniso_cns.grid import build_grid
from aniso_cns.harness import UnderResolvedWarning

settings.register_profile(
    "lab", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("lab")


@pytest.fixture(autouse=True)
def _quiet_resolution_warning():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnderResolvedWarning)
        yield


@pytest.fixture(scope="session")
def grid16():
    return build_grid(16, 16, 33, height=2 * np.pi)


@pytest.fixture(scope="session")
def grid_default():
    return build_grid(32, 32, 64)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance") or sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
