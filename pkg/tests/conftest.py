import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_VERDICTS = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the terminal summary prints them in order."""
    table = request.config.stash.setdefault(_VERDICTS, {})

    def record(number: int, title: str, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        table[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    table = config.stash.get(_VERDICTS, {})
    if table:
        terminalreporter.section("acceptance criteria")
        for n in sorted(table):
            terminalreporter.write_line(table[n])
