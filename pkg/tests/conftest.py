import pytest

_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one acceptance verdict; the summary prints a line per criterion."""

    def record(key, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}"
        _CRITERIA[key] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=lambda k: (int(k.split(".")[0]), k)):
        terminalreporter.write_line(_CRITERIA[key])
