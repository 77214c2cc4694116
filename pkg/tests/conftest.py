import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synth import build_dataset, scene_roster  # noqa: E402


@pytest.fixture(scope="session")
def synthetic_dataset(tmp_path_factory):
    """The 30-scene acceptance dataset (both panorama sizes)."""
    root = tmp_path_factory.mktemp("synth30")
    return build_dataset(root, scene_roster())


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Six quick scenes for unit/integration tests."""
    roster = [s for s in scene_roster() if s["erp_w"] == 2000][:6]
    root = tmp_path_factory.mktemp("synth6")
    return build_dataset(root, roster)
