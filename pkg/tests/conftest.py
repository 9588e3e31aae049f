import pytest

_VERDICTS = []


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def record(label, ok, detail=""):
        line = f"criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        _VERDICTS.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
