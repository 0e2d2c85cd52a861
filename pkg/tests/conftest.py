import functools

import pytest

from fsoqkd.channel import case_study, channel_distribution


@functools.lru_cache(maxsize=None)
def case_dist(case_id):
    return channel_distribution(case_study(case_id))


@pytest.fixture(scope="session")
def dists():
    """Composed channel distributions of the eight preset links (computed on demand)."""
    class _Lazy(dict):
        def __missing__(self, key):
            return case_dist(key)
    return _Lazy()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line[1])
