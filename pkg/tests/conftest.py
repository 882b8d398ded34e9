import sys
from pathlib import Path

import numpy as np
import pytest

SRC = Path(__file__).resolve().parent.parent / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from supobs.engine import load_scenario  # noqa: E402
from supobs.lmi import load_certificate  # noqa: E402
from supobs.model import PlantConfig  # noqa: E402

DATA = SRC / "supobs" / "data"
SCENARIOS = DATA / "scenarios"


@pytest.fixture(scope="session")
def plant():
    return PlantConfig()


@pytest.fixture(scope="session")
def certificate():
    return load_certificate(DATA / "case_study_certificate.json")


@pytest.fixture(scope="session")
def certificate_path():
    return DATA / "case_study_certificate.json"


def scenario_path(name: str) -> Path:
    return SCENARIOS / f"{name}.json"


@pytest.fixture(scope="session")
def bundled_scenario():
    return lambda name: load_scenario(scenario_path(name))


def assert_allclose(actual, expected, **kwargs):
    np.testing.assert_allclose(actual, expected, **kwargs)
