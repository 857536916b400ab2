import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from mfglab.measures import TorusGrid, probe_panel
from mfglab.mfg import SolverOptions
from mfglab.model import ModelSpec


@pytest.fixture(scope="session")
def grid32():
    return TorusGrid(32)


@pytest.fixture(scope="session")
def model():
    return ModelSpec()


@pytest.fixture(scope="session")
def panel32(grid32):
    return probe_panel(grid32)


@pytest.fixture(scope="session")
def fast_opts():
    return SolverOptions(dt=1e-2, tol_tail=1e-4)
