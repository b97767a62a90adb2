import numpy as np
import pytest

from tumour_adjoint import Grid, ModelConstants, Observations, Parameters, SolverConfig, grow_from_seed, solve_forward

P_TRUE = Parameters(0.1, 0.05, 0.9)
P_START = Parameters(0.16, 0.03, 1.0)


@pytest.fixture(scope="session")
def grid():
    return Grid(n_y=30, dt=0.01, n_t=50)


@pytest.fixture(scope="session")
def mc():
    return ModelConstants()


@pytest.fixture(scope="session")
def ic34(grid, mc):
    return grow_from_seed(P_TRUE, mc, SolverConfig(), 34.0, grid)


@pytest.fixture(scope="session")
def traj_true(ic34, grid, mc):
    return solve_forward(P_TRUE, ic34, grid, mc)


@pytest.fixture(scope="session")
def obs_true(traj_true):
    return Observations.from_trajectory(traj_true, mu1=100.0, mu2=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
