from pathlib import Path

import pytest

from sbpc.scenario import parse_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture(scope="session")
def scenario_dir():
    return SCENARIOS


@pytest.fixture(scope="session")
def desk():
    return parse_scenario(SCENARIOS / "desk_integrator.ini")


@pytest.fixture(scope="session")
def train_demo():
    return parse_scenario(SCENARIOS / "train_demo.ini")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
