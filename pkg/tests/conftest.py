from __future__ import annotations

import pytest

RESULTS: dict[int, str] = {}


@pytest.fixture
def record():
    """Store the status line of an acceptance criterion for the summary."""
    def _record(number: int, passed: bool, detail: str) -> bool:
        RESULTS[number] = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(RESULTS[number])
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
