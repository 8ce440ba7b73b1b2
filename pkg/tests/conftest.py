from __future__ import annotations

import functools

import pytest
from hypothesis import HealthCheck, settings

from co2intensity.asis import compute_asis
from co2intensity.cli import analyze
from co2intensity.dispatch import solve_dispatch
from co2intensity.scenarios import builtin
from co2intensity.whatif import compute_whatif

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_ACCEPTANCE: list[str] = []


class ScenarioRuns:
    """Built-in scenarios with dispatch and analyses computed once per session."""

    @functools.cache
    def system(self, name):
        return builtin(name)

    @functools.cache
    def dispatch(self, name):
        return solve_dispatch(self.system(name))

    @functools.cache
    def asis(self, name):
        return compute_asis(self.system(name), self.dispatch(name))

    @functools.cache
    def whatif(self, name):
        return compute_whatif(self.system(name), self.dispatch(name))

    @functools.cache
    def fd_check(self, name):
        """Full CLI analysis path with the finite-difference oracle on every entry."""
        return analyze(self.system(name), method="whatif", fd_check=True, source=f"builtin:{name}")


@pytest.fixture(scope="session")
def runs() -> ScenarioRuns:
    return ScenarioRuns()


@pytest.fixture
def report():
    """Record one acceptance line; all lines are repeated in the terminal summary."""
    def record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        _ACCEPTANCE.append(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
