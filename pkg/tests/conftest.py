import functools

import hypothesis
import numpy as np
import pytest

from pflab.analysis import Model
from pflab.eigen import SolverConfig, ground_state
from pflab.field import CutoffProfile, GridSpec, build_grid
from pflab.fock import build_fock_basis

hypothesis.settings.register_profile("default", deadline=None, max_examples=40)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=5)
hypothesis.settings.load_profile("default")


@pytest.fixture(scope="session")
def small_basis():
    """(3,2,2) smoothstep grid, N_max = 3, dimension 2925."""
    return build_fock_basis(build_grid(GridSpec(3, 2, 2)), 3)


@pytest.fixture(scope="session")
def small_model(small_basis):
    return Model.build(small_basis)


@pytest.fixture(scope="session")
def model532():
    return Model.build(build_fock_basis(build_grid(GridSpec(5, 3, 2)), 3))


@pytest.fixture(scope="session")
def solve532(model532):
    """Cached ground states on the (5,3,2) model, keyed by alpha."""
    @functools.lru_cache(maxsize=None)
    def solve(alpha):
        return ground_state(model532.parts.at(alpha), SolverConfig())
    return solve


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def sharp():
    return CutoffProfile.sharp(1.0)


SWEEP_ALPHAS = (0.02, 0.04, 0.08, 0.16)


@pytest.fixture(scope="session")
def sweep532(model532):
    import time
    from pflab.analysis import alpha_sweep
    t0 = time.perf_counter()
    res = alpha_sweep(model532.basis, SWEEP_ALPHAS, SolverConfig(), model=model532)
    res.elapsed = time.perf_counter() - t0
    return res


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
