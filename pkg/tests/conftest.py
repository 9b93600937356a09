import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from livemig import AveragedParams, ContainerProfile, RateTrace  # noqa: E402


def averaged(memory_mb=200.0, rate=200.0, dirty=100.0, delay=0.0, handoff=None, cid="c0"):
    return ContainerProfile(cid, memory_mb, rate if handoff is None else handoff,
                            AveragedParams(rate, dirty, delay))


def traced(rates, dirties, gaps, memory_mb=200.0, handoff=200.0, cid="c0"):
    return ContainerProfile(cid, memory_mb, handoff, RateTrace.from_columns(rates, dirties, gaps))


@pytest.fixture
def half_lambda():
    """200 MB at 200 Mbps with 100 Mbps dirtying, no delay."""
    return averaged()


_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when not in ("setup", "call"):
        return
    number, title = marker.args
    if report.failed or (report.when == "call" and number not in _criteria):
        _criteria[number] = ("FAIL" if report.failed else "PASS", title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        status, title = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")
