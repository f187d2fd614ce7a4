import numpy as np
import pytest

from doilab import ensembles
from doilab.io import parse_function
from doilab.symbols import DEFAULT_SPECS

_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_KEY] = {}


@pytest.fixture
def acceptance_log(request):
    """Record ``(criterion, passed, detail)`` lines for the terminal summary."""
    log = request.config.stash[_KEY]

    def record(number: int, title: str, passed: bool, detail: str) -> None:
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {title}: {detail}"
        log[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(_KEY, {})
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(log):
        terminalreporter.write_line(log[number])


@pytest.fixture(scope="session")
def functions():
    return {spec: parse_function(spec) for spec in DEFAULT_SPECS}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def herm(n, seed, radius=2.0):
    return ensembles.gaussian_hermitian(n, seed, radius)
