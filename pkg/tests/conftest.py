import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Record one acceptance criterion; returns the line that was logged."""

    def record(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} | {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return line

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
