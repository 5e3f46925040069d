import pytest

_LINES_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES_KEY] = []


@pytest.fixture
def acceptance_log(request):
    """Callable ``log(n, ok, detail)`` that records one acceptance line and asserts ``ok``."""
    lines = request.config.stash[_LINES_KEY]

    def log(n, ok, detail):
        line = f"ACCEPTANCE {n:2d} {'PASS' if ok else 'FAIL'} {detail}"
        lines.append((n, line))
        print(line)
        assert ok, line

    return log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
