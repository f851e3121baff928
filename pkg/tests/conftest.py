import functools

import pytest
from hypothesis import HealthCheck, settings

from hybridcr.dynamics import reference_params
from hybridcr.monitor import run_monitors
from hybridcr.scenario_io import builtin_scenario

settings.register_profile(
    "repo", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def params():
    return reference_params()


@functools.lru_cache(maxsize=None)
def cached_run(name: str, seed: int = 0, horizon=None):
    """Simulate a built-in scenario once per session."""
    scen = builtin_scenario(name, seed)
    trace = scen.run(horizon)
    return scen, trace, run_monitors(trace, scen.params)


@pytest.fixture(scope="session")
def table2_run():
    return cached_run("table2")


@pytest.fixture(scope="session")
def reassign3_run():
    return cached_run("reassign3")


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
