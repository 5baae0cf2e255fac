from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
SCENARIO_DIR = ROOT / "scenarios"


@pytest.fixture(scope="session")
def scenario_dir() -> Path:
    return SCENARIO_DIR


@pytest.fixture(scope="session")
def default_scenario():
    from pipefollow import sim
    return sim.load_scenario(SCENARIO_DIR / "default.scenario")


@pytest.fixture(scope="session")
def detuned_scenario():
    from pipefollow import sim
    return sim.load_scenario(SCENARIO_DIR / "detuned.scenario")
