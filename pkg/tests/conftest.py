from __future__ import annotations

from pathlib import Path

import pytest

from spheremcf.cli import parse_config
from spheremcf.flow_controller import run

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

# acceptance lines collected by test_acceptance.py, printed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def config(name: str):
    return parse_config(CONFIGS / f"{name}.json")


_RUNS: dict[str, object] = {}


def cached_run(name: str):
    """Run a checked-in config once per session."""
    if name not in _RUNS:
        _RUNS[name] = run(config(name))
    return _RUNS[name]


@pytest.fixture(scope="session")
def dumbbell_report():
    return cached_run("dumbbell")


@pytest.fixture(scope="session")
def sphere_report():
    return cached_run("geodesic_sphere")


@pytest.fixture(scope="session")
def tube_report():
    return cached_run("tube")


@pytest.fixture(scope="session")
def equator_report():
    return cached_run("equator")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
