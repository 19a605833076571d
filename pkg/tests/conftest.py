"""
Per-criterion bookkeeping for the acceptance suite.

Tests tagged ``@pytest.mark.criterion(id, title)`` are grouped by id; a
criterion passes only if every test carrying its id passes. The terminal
summary prints one PASS/FAIL line per criterion plus any logged trends.
"""

from __future__ import annotations

import pytest

_OUTCOMES: dict[str, dict] = {}
_NOTES: list[str] = []


def _sort_key(cid: str):
    digits = "".join(ch for ch in cid if ch.isdigit())
    return (int(digits) if digits else 10**6, cid)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    cid, title = str(marker.args[0]), marker.args[1]
    entry = _OUTCOMES.setdefault(cid, {"title": title, "passed": True, "ran": False})
    if report.when == "call":
        entry["ran"] = True
    if report.failed:
        entry["passed"] = False


@pytest.fixture
def acceptance_log():
    """Append a line to the acceptance summary (trends that are reported, not asserted)."""
    return _NOTES.append


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_OUTCOMES, key=_sort_key):
        entry = _OUTCOMES[cid]
        if not entry["ran"] and entry["passed"]:
            status = "SKIP"
        else:
            status = "PASS" if entry["passed"] else "FAIL"
        terminalreporter.write_line(f"{status}  {cid:<5s} {entry['title']}")
    if _NOTES:
        terminalreporter.section("logged trends")
        for line in _NOTES:
            terminalreporter.write_line(line)
