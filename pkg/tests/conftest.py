import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_acceptance: list[str] = []


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion."""

    def record(name: str, ok: bool, detail: str) -> None:
        _acceptance.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance:
            terminalreporter.write_line(line)
