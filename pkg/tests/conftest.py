import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=50, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


_ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(number, ok, detail)``."""
    store = request.config.stash.setdefault(_ACCEPTANCE_KEY, {})

    def record(num, ok, detail=""):
        line = f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}"
        store[num] = line
        print(line)
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_ACCEPTANCE_KEY, {})
    if store:
        terminalreporter.section("acceptance")
        for num in sorted(store):
            terminalreporter.write_line(store[num])
