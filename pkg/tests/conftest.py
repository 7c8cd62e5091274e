import builders


def pytest_terminal_summary(terminalreporter):
    if builders.ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(builders.ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
