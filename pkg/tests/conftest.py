"""Repeats the acceptance verdict lines after the test summary.

Pass/fail lines printed inside passing tests are swallowed by pytest's
capture, so test_acceptance also appends them to the list below and this
hook writes them where a plain `pytest -v` run will show them.
"""

import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_lines():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
