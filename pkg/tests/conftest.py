import os
import sys

from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


import pytest

_VERDICTS = {}


@pytest.fixture
def verdict():
    """Record the one-line outcome of an acceptance criterion (printed at the end of the run)."""

    def record(key, passed, text):
        line = f"[acceptance] {key} {'PASS' if passed else 'FAIL'}  {text}"
        _VERDICTS[key] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(_VERDICTS, key=lambda k: int(k[1:])):
            terminalreporter.write_line(_VERDICTS[key])
