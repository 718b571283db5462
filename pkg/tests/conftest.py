"""Collects acceptance-criterion outcomes and prints one line per criterion."""

import pytest

CRITERIA = {
    1: "exact-sampling correctness",
    2: "Soules bound validity and tightness",
    3: "Clopper-Pearson coverage",
    4: "block-diagonal bounds from 10 accepted samples",
    5: "adaptive vs fixed partitioning rejections",
    6: "nesting on the first refinement",
    7: "polynomial scaling on all-ones matrices",
    8: "bound tightening ratio",
    9: "tracking sample efficiency",
    10: "network matrices (conditional)",
}

_results: dict[int, str] = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when not in ("setup", "call"):
        return
    number = marker.args[0]
    if call.excinfo is None:
        if call.when == "call":
            _results.setdefault(number, "PASS")
        return
    if call.excinfo.errisinstance(pytest.skip.Exception):
        _results[number] = "SKIP"
    else:
        _results[number] = "FAIL"


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number, title in CRITERIA.items():
        status = _results.get(number, "NOT RUN")
        terminalreporter.write_line(f"criterion {number:2d} {status:7s} {title}")
