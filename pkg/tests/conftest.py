"""Shared fixtures and the opt-in switch for slow closed-loop runs"""

from pathlib import Path

import pytest

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow closed-loop episodes")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full closed-loop episodes, skipped without --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def scenario_dir():
    """Directory of the bundled scenario files"""
    return SCENARIO_DIR


@pytest.fixture
def example1():
    """Cubic planar system with its relative-degree-1 barrier"""
    from src.cli.scenario import ScenarioConfig

    return ScenarioConfig.from_file(SCENARIO_DIR / "example1.cfg")


@pytest.fixture
def example2():
    """Mass-spring-damper with its relative-degree-2 barrier"""
    from src.cli.scenario import ScenarioConfig

    return ScenarioConfig.from_file(SCENARIO_DIR / "example2.cfg")


@pytest.fixture
def example3():
    """Double-integrator quadcopter with six box barriers"""
    from src.cli.scenario import ScenarioConfig

    return ScenarioConfig.from_file(SCENARIO_DIR / "example3.cfg")
