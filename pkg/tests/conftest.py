"""Shared pytest configuration.

Acceptance tests call ``record_criterion`` with their verdict; the terminal
summary then prints one PASS/FAIL line per criterion.
"""

import pytest

_VERDICTS = {}


@pytest.fixture
def record_criterion():
    def record(number, ok, detail=""):
        _VERDICTS[number] = (bool(ok), detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        ok, detail = _VERDICTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
