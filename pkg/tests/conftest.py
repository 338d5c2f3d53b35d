import pytest

_VERDICTS = []


@pytest.fixture
def verdict(request):
    """Print and remember one PASS/FAIL line for an acceptance criterion."""
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(number, passed, summary):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {summary}"
        _VERDICTS.append(line)
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        return passed
    return emit


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
