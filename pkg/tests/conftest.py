import pytest

RESULTS = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """``criterion(n, ok, detail)`` records a PASS/FAIL line and asserts ``ok``."""
    lines = request.config.stash.setdefault(RESULTS, {})

    def record(n, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}"
        lines[n] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(RESULTS, {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
