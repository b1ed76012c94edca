"""Per-criterion reporting for the acceptance suite.

Tests marked ``@pytest.mark.criterion(k, "title")`` are grouped by ``k``; the
terminal summary prints one PASS/FAIL line per criterion.  A criterion passes
only if every one of its tests passed; an expected failure counts as FAIL.
Details recorded with ``record_property("detail", ...)`` are echoed below the
line.
"""

from __future__ import annotations

import pytest

_RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion this test checks")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _RESULTS.setdefault(number, {"title": title, "ok": True, "tests": 0, "details": []})
    if report.when == "call" or (report.when == "setup" and not report.passed):
        entry["tests"] += 1
        passed = report.passed and not hasattr(report, "wasxfail")
        entry["ok"] &= passed
        status = "ok" if passed else ("expected failure" if hasattr(report, "wasxfail") else "failed")
        notes = [v for k, v in report.user_properties if k == "detail"]
        entry["details"].append(f"{item.name}: {status}" + (f" -- {'; '.join(notes)}" if notes else ""))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_RESULTS):
        entry = _RESULTS[number]
        tr.write_line(f"criterion {number:>2}: {'PASS' if entry['ok'] else 'FAIL'}  {entry['title']}")
        for line in entry["details"]:
            tr.write_line(f"              {line}")
