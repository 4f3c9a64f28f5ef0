import pytest

_acceptance_lines = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Shared sink for one-line acceptance results, echoed after the run."""
    return _acceptance_lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance results")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
