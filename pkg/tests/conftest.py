"""Shared pytest hooks: surface the acceptance PASS/FAIL lines in the
terminal summary regardless of capture mode."""

CRITERION_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)
