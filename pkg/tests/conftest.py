import pytest

from obslearn.replicate import replicate

ACCEPTANCE_LINES: list[str] = []
_REPORTS: dict = {}


def report_for(rid: str):
    """Each replication runs once per session and is shared between tests."""
    if rid not in _REPORTS:
        _REPORTS[rid] = replicate(rid)
    return _REPORTS[rid]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(12345)
