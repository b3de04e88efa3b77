import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from scbsim.scenario import load_config

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture(scope="session")
def baseline_cfg():
    """The shipped two-cluster baseline scenario."""
    return load_config((CONFIG_DIR / "baseline.cfg").read_text())


@pytest.fixture()
def baseline_text():
    return (CONFIG_DIR / "baseline.cfg").read_text()
