import numpy as np
import pytest

verdicts = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[verdicts] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def verdict(request):
    """Record one acceptance line; returns the pass flag so the test can assert on it."""
    log = request.config.stash[verdicts]

    def record(number, passed, summary):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {summary}"
        log.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    log = config.stash[verdicts]
    if log:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(log):
            terminalreporter.write_line(line)
