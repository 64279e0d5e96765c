ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    """Always show the one-line acceptance verdicts, even under capture."""
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
