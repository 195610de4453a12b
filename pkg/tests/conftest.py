import sys
from pathlib import Path

import pytest
from hypothesis import settings

from lamfatigue.fczm import CohesiveParams
from lamfatigue.ply import PlyParams

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("ci", deadline=None, derandomize=True, print_blob=True)
settings.load_profile("ci")

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def ply_crack():
    # reference fracture and fatigue values, penalty stiffness chosen for the cracks
    return CohesiveParams(K_n=1.0e6, f_n=95.0, f_sh=107.0, G_Ic=1.0, G_IIc=1.0)


@pytest.fixture
def interface():
    return CohesiveParams(K_n=82720.0, f_n=45.0, f_sh=45.0, G_Ic=1.0, G_IIc=1.0)


@pytest.fixture
def ply_params():
    return PlyParams(161000.0, 11380.0, 5170.0, 0.32, 0.0, 3.0e-5)


@pytest.fixture
def root():
    return ROOT


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.VERDICTS):
        terminalreporter.write_line(mod.VERDICTS[k])
