import importlib.resources

import pytest

from fbmgame.equilibrium import solve_multiplier
from fbmgame.fbm import TimeGrid, generate_paths
from fbmgame.scenario import parse_scenario


def _bundled(name: str) -> str:
    return str(importlib.resources.files("fbmgame") / "data" / name)


@pytest.fixture(scope="session")
def reference_scenario():
    return parse_scenario(_bundled("reference_scenario.json"))


@pytest.fixture(scope="session")
def two_player_scenario():
    return parse_scenario(_bundled("two_player_scenario.json"))


@pytest.fixture(scope="session")
def reference_solution(reference_scenario):
    return solve_multiplier(reference_scenario.game)


@pytest.fixture(scope="session")
def two_player_solution(two_player_scenario):
    return solve_multiplier(two_player_scenario.game)


@pytest.fixture(scope="session")
def grid256():
    return TimeGrid(1.0, 256)


@pytest.fixture(scope="session")
def shared_paths(grid256):
    """Small shared batch of exactly sampled paths for pathwise tests."""
    return generate_paths(grid256, 0.75, 64, seed=99)
