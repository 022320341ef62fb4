from pathlib import Path

import numpy as np
import pytest

from pose_align.scenario import scenario_from_dict
from tests.strategies import INITIAL_POSITION, INITIAL_ROTVEC_DEG, TARGET_POSITION

REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def scenario_dir():
    return REPO_ROOT / "scenarios"


@pytest.fixture
def make_scenario():
    """Build a validated scenario from keyword overrides of a 500 mm / 90 deg clean run."""
    def _make(**overrides):
        data = {
            "name": "test",
            "controller": "v2",
            "plant_profile": "clean",
            "initial": {"position": list(INITIAL_POSITION), "rotvec_deg": list(INITIAL_ROTVEC_DEG)},
            "target": {"position": list(TARGET_POSITION)},
            "max_sim_time": 120.0,
            "seeds": [0],
        }
        data.update(overrides)
        return scenario_from_dict(data)
    return _make
