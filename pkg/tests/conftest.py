import pytest

_LINES: list[str] = []


@pytest.fixture
def report():
    """Append a verdict line; all lines are repeated in the terminal summary."""

    def add(line: str):
        print(line)
        _LINES.append(line)

    return add


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
