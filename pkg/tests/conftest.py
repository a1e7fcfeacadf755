import warnings

import numpy as np
import pytest
from hypothesis import settings

from mfrp.errors import PoorFitWarning

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _quiet_fits():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PoorFitWarning)
        yield


CRITERIA = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[CRITERIA] = []


@pytest.fixture
def report_criterion(request):
    """Record (and print) one acceptance line; the terminal summary repeats them all."""

    def record(number, passed, detail):
        line = f"CRITERION {number:>2} {'PASS' if passed else 'FAIL'}: {detail}"
        print(line)
        request.config.stash[CRITERIA].append((number, line))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
