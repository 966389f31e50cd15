import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest

from evtrade.labeling import label_events
from evtrade.synth import GeoConfig, RoleConfig, WorldConfig, assign_roles, build_decision_events, generate_world, simulate_journeys

SMALL_WORLD = WorldConfig(n_stations=80, n_evs=50)


@pytest.fixture(scope="session")
def small_events():
    world = generate_world(SMALL_WORLD, 5)
    journeys = simulate_journeys(world, 400, 5)
    assign_roles(journeys, RoleConfig(), 5)
    return build_decision_events(journeys, world.stations, GeoConfig(), SMALL_WORLD)


@pytest.fixture(scope="session")
def labelled_small(small_events):
    return small_events, label_events(small_events)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
