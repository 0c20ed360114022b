import pytest
from hypothesis import HealthCheck, settings

from mimcool import presets

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_ACCEPTANCE_LINES = {}


@pytest.fixture
def acceptance_line():
    """Record one summary line per acceptance criterion for the terminal report."""
    def record(criterion, text):
        _ACCEPTANCE_LINES[criterion] = text
        print(text)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(_ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def section5():
    return presets.SECTION5


@pytest.fixture(scope="session")
def omega_m():
    return presets.OMEGA_M
