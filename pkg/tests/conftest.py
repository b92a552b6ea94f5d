import pytest

# filled by tests/test_acceptance.py; echoed after the run so the lines survive output capture
ACCEPTANCE_LINES = {}


@pytest.fixture
def report():
    def _report(number, ok, detail=""):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}" + (f"  ({detail})" if detail else "")
        ACCEPTANCE_LINES[number] = line
        print(line)
        assert ok, line
    return _report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
