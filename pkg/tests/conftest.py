import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from repsim.he import HeParams, make_backend  # noqa: E402

SIM_PARAMS = HeParams(slot_count=8, depth_budget=3, epsilon=1e-6)
LATTICE_PARAMS = HeParams(slot_count=8, depth_budget=3, epsilon=1e-5, backend_kind="lattice")


@pytest.fixture(params=["simulation", pytest.param("lattice", marks=pytest.mark.lattice)])
def backend(request):
    params = SIM_PARAMS if request.param == "simulation" else LATTICE_PARAMS
    return make_backend(params, seed=1234)


@pytest.fixture
def sim():
    return make_backend(SIM_PARAMS, seed=99)


@pytest.fixture
def km(backend):
    return backend.keygen()
