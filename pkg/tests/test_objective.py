import numpy as np
import pytest

from conftest import P_START, P_TRUE
from tumour_adjoint import Grid, Observations, eval_J, reduced_objective, solve_forward, sweep_objective
from tumour_adjoint.objective import gradient_time_weights


def test_J_zero_on_own_trajectory(traj_true, obs_true):
    assert eval_J(traj_true, obs_true) == 0.0


def test_J_nonnegative_and_homogeneous_in_weights(traj_true, obs_true, rng):
    obs = Observations(obs_true.N_star * (1 + 0.01 * rng.uniform(-1, 1, obs_true.N_star.shape)),
                       obs_true.S_star + 0.1, mu1=100.0, mu2=1.0)
    J = eval_J(traj_true, obs)
    assert J > 0
    scaled = Observations(obs.N_star, obs.S_star, mu1=300.0, mu2=3.0)
    assert eval_J(traj_true, scaled) == pytest.approx(3 * J, rel=1e-13)


def test_J_radius_term_by_hand(traj_true):
    # constant offset d in S only: J = mu2/2 * d^2 * T
    obs = Observations(traj_true.N, traj_true.S + 0.2, mu1=100.0, mu2=2.0)
    assert eval_J(traj_true, obs) == pytest.approx(0.5 * 2.0 * 0.04 * 0.5, rel=1e-12)


def test_J_density_term_by_hand(traj_true):
    # constant offset d in N only: J = mu1/2 * d^2 * 1 * T
    obs = Observations(traj_true.N + 0.1, traj_true.S, mu1=100.0, mu2=1.0)
    assert eval_J(traj_true, obs) == pytest.approx(0.5 * 100.0 * 0.01 * 0.5, rel=1e-12)


def test_observations_validation():
    with pytest.raises(ValueError):
        Observations(np.zeros((3, 4)), np.zeros(2))
    with pytest.raises(ValueError):
        Observations(np.zeros((3, 4)), np.zeros(3), mu1=0.0, mu2=0.0)
    with pytest.raises(ValueError):
        Observations(np.zeros((3, 4)), np.zeros(3), mu1=-1.0)


def test_observations_grid_mismatch(traj_true):
    obs = Observations(np.zeros((10, 30)), np.zeros(10))
    with pytest.raises(ValueError):
        eval_J(traj_true, obs)


def test_gradient_time_weights_left_endpoint():
    g = Grid(n_y=5, dt=0.1, n_t=4)
    w = gradient_time_weights(g)
    np.testing.assert_array_equal(w, [0.1, 0.1, 0.1, 0.1, 0.0])
    assert w.sum() == pytest.approx(0.4)


def test_reduced_objective_zero_gradient_at_exact_fit(ic34, grid, mc, obs_true):
    J, g = reduced_objective(P_TRUE, ic34, obs_true, grid, mc)
    assert J < 1e-20
    assert np.max(np.abs(g)) < 1e-10


def test_reduced_objective_descent_direction(ic34, grid, mc, obs_true):
    J0, g = reduced_objective(P_START, ic34, obs_true, grid, mc)
    p1 = P_START.as_array() - 1e-2 * g
    traj = solve_forward(type(P_START).from_array(p1), ic34, grid, mc)
    assert eval_J(traj, obs_true) < J0


def test_degenerate_sweep_equals_objective(ic34, grid, mc, obs_true):
    res = sweep_objective(ic34, obs_true, grid, {"c_c": (0.12, 0.12, 1), "c_d": (0.04, 0.04, 1), "sigma": 0.95}, mc)
    J, _ = reduced_objective(type(P_TRUE)(0.12, 0.04, 0.95), ic34, obs_true, grid, mc)
    assert res.J.shape == (1, 1)
    assert res.J[0, 0] == J


def test_sweep_layout_and_argmin(ic34, grid, mc, obs_true):
    res = sweep_objective(ic34, obs_true, grid, {"c_c": 0.1, "c_d": (0.03, 0.07, 3), "sigma": (0.8, 1.0, 3)}, mc)
    assert (res.x_name, res.y_name, res.fixed_name) == ("c_d", "sigma", "c_c")
    assert res.J.shape == (3, 3)
    assert res.argmin == (1, 1)
    assert res.J[1, 1] == 0.0
    assert res.cell_contains(0.05, 0.9)
    assert res.argmin_cell == ((0.03, 0.07), (0.8, 1.0))


def test_sweep_requires_two_ranges(ic34, grid, mc, obs_true):
    with pytest.raises(ValueError):
        sweep_objective(ic34, obs_true, grid, {"c_c": 0.1, "c_d": 0.05, "sigma": (0.8, 1.0, 3)}, mc)
