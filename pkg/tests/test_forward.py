import numpy as np
import pytest

from tumour_adjoint.errors import CFLError, CollapseError, ConvergenceError
from tumour_adjoint.forward import (
    InitialCondition,
    SolverConfig,
    StateTrajectory,
    grow_from_seed,
    radial_laplacian,
    solve_forward,
    solve_nutrient,
    solve_velocity,
    step_density,
    step_radius,
)
from tumour_adjoint.grid import Grid
from tumour_adjoint.kinetics import ModelConstants, Parameters, rate_b
from tumour_adjoint.verify import residual_audit

from conftest import P_TRUE


# --- nutrient ----------------------------------------------------------------


def _linear_uptake_case(n, lam=2.0):
    # huge c_c makes k(C) S^2 N = lam^2 C to O(1/c_c): C = sinh(lam y)/(y sinh lam)
    c_c = 1e9
    p = Parameters(c_c, 0.05, 0.9)
    mc = ModelConstants(beta_hat_a=lam**2 * c_c)
    y = np.linspace(0, 1, n)
    C = solve_nutrient(np.ones(n), 1.0, p, mc)
    exact = np.empty(n)
    exact[0] = lam / np.sinh(lam)
    exact[1:] = np.sinh(lam * y[1:]) / (y[1:] * np.sinh(lam))
    return np.max(np.abs(C - exact))


def test_nutrient_matches_linear_uptake_solution():
    assert _linear_uptake_case(30) < 1e-3


def test_nutrient_second_order_in_space():
    e = [_linear_uptake_case(n) for n in (21, 41, 81)]
    orders = np.log2(np.array(e[:-1]) / np.array(e[1:]))
    assert np.all(orders > 1.9)


def test_nutrient_without_cells_is_uniform():
    C = solve_nutrient(np.zeros(30), 34.0, P_TRUE, ModelConstants())
    np.testing.assert_array_equal(C, np.ones(30))


def test_nutrient_nonconvergence_raises():
    with pytest.raises(ConvergenceError) as info:
        solve_nutrient(np.ones(30), 60.0, P_TRUE, ModelConstants(), SolverConfig(max_picard=1))
    assert info.value.residual > 0


def test_radial_laplacian_of_quadratic():
    # (y^2)'' + (2/y)(y^2)' = 6 everywhere, origin row included
    y = np.linspace(0, 1, 30)
    np.testing.assert_allclose(radial_laplacian(y**2, y[1])[:-1], 6.0, rtol=1e-10)


# --- velocity ----------------------------------------------------------------


def test_velocity_for_constant_source():
    n, S = 30, 7.0
    y = np.linspace(0, 1, n)
    C = np.ones(n)
    b = rate_b(1.0, P_TRUE, ModelConstants())
    V = solve_velocity(np.ones(n), C, S, P_TRUE, ModelConstants())
    np.testing.assert_allclose(V, b * S * y / 3, rtol=1e-12, atol=1e-14)


def test_velocity_for_linear_source():
    n, S = 30, 7.0
    y = np.linspace(0, 1, n)
    b = rate_b(1.0, P_TRUE, ModelConstants())
    V = solve_velocity(y, np.ones(n), S, P_TRUE, ModelConstants())
    np.testing.assert_allclose(V, b * S * y**2 / 4, rtol=1e-12, atol=1e-14)


def test_velocity_shape_mismatch():
    with pytest.raises(ValueError):
        solve_velocity(np.ones(5), np.ones(6), 1.0, P_TRUE, ModelConstants())


# --- steppers ----------------------------------------------------------------


def test_step_density_cfl_guard():
    g = Grid(n_y=30, dt=1.0)
    n = 30
    V = np.linspace(0, 50, n)
    with pytest.raises(CFLError) as info:
        step_density(np.ones(n), np.ones(n), V, 1.0, V[-1] * 2, P_TRUE, ModelConstants(), g)
    assert info.value.courant > 1


def test_step_radius_forward_euler_and_collapse():
    assert step_radius(2.0, 3.0, 0.1) == pytest.approx(2.3)
    with pytest.raises(CollapseError):
        step_radius(1.0, -200.0, 0.01)


def test_initial_condition_validation():
    with pytest.raises(ValueError):
        InitialCondition(np.full(5, 1.2), 3.0)
    with pytest.raises(ValueError):
        InitialCondition(np.ones(5), 0.0)


# --- seed growth -------------------------------------------------------------


def test_seed_target_one_returns_seed(mc):
    ic = grow_from_seed(P_TRUE, mc, SolverConfig(), 1.0)
    assert ic.S0 == 1.0 and np.all(ic.N0 == 1.0)


def test_seed_target_below_one_rejected(mc):
    with pytest.raises(ValueError):
        grow_from_seed(P_TRUE, mc, SolverConfig(), 0.5)


def test_seed_timeout(mc):
    with pytest.raises(ConvergenceError):
        grow_from_seed(P_TRUE, mc, SolverConfig(max_seed_time=0.5), 34.0)


def test_seed_reaches_target(ic34):
    assert 34.0 <= ic34.S0 < 34.2
    assert np.all((ic34.N0 > 0.5) & (ic34.N0 <= 1.0))


# --- full march --------------------------------------------------------------


def test_standard_run_invariants(traj_true):
    tr = traj_true
    assert np.all(tr.C[:, -1] == 1.0)
    assert np.all(np.diff(tr.C, axis=1) >= -1e-14)
    assert np.all(tr.V[:, 0] == 0.0)
    assert tr.N.min() >= 0.0 and tr.N.max() <= 1.0
    assert np.all(np.diff(tr.S) > 0)
    np.testing.assert_array_equal(tr.S_prime, tr.V[:, -1])


def test_zero_density_is_a_fixed_point(grid, mc):
    ic = InitialCondition(np.zeros(grid.n_y), 12.0)
    tr = solve_forward(P_TRUE, ic, grid, mc)
    assert np.all(tr.N == 0.0)
    assert np.all(tr.C == 1.0)
    assert np.all(tr.V == 0.0)
    assert np.all(tr.S == 12.0)


def test_initial_condition_grid_mismatch(grid, mc):
    with pytest.raises(ValueError):
        solve_forward(P_TRUE, InitialCondition(np.ones(7), 2.0), grid, mc)


def _smooth_run(n_y, dt, T=0.2):
    g = Grid(n_y=n_y, dt=dt, n_t=int(round(T / dt)))
    ic = InitialCondition(0.9 - 0.3 * g.y**2, 20.0)
    return solve_forward(P_TRUE, ic, g, ModelConstants())


def _orders(errors):
    e = np.asarray(errors)
    return np.log2(e[:-1] / e[1:])


def test_self_convergence_in_space():
    runs = [_smooth_run(n, 5e-4) for n in (41, 81, 161, 321)]
    err = [np.max(np.abs(a.N - b.N[:, ::2])) for a, b in zip(runs, runs[1:])]
    assert np.all(_orders(err) >= 1.0)


def test_self_convergence_in_time():
    runs = [_smooth_run(41, dt) for dt in (0.02, 0.01, 0.005, 0.0025)]
    err = [np.max(np.abs(a.N[-1] - b.N[-1])) for a, b in zip(runs, runs[1:])]
    errS = [abs(a.S[-1] - b.S[-1]) for a, b in zip(runs, runs[1:])]
    assert np.all(_orders(err) >= 1.0)
    assert np.all(_orders(errS) >= 0.99)


# --- residual audit ----------------------------------------------------------


def test_residual_audit_of_computed_trajectory(traj_true, ic34, grid, mc):
    audit = residual_audit(traj_true, P_TRUE, mc, grid, ic34)
    rel = audit.relative
    assert rel[0] < 1e-10  # density: the scheme's own discrete operator
    assert rel[2] < SolverConfig().residual_tol  # nutrient: Picard tolerance
    assert rel[3] < 1e-10  # radius
    assert audit.values[4] == audit.values[5] == 0.0
    assert audit.values[7] == audit.values[8] == 0.0
    # quadrature and one-sided difference: truncation-sized
    assert rel[1] < 2 * grid.h**2
    assert audit.values[6] < grid.h


def test_residual_audit_of_trivial_state(grid, mc):
    n = grid.n_t + 1
    tr = StateTrajectory(np.zeros((n, grid.n_y)), np.ones((n, grid.n_y)), np.zeros((n, grid.n_y)),
                         np.full(n, 5.0), np.zeros(n), grid)
    audit = residual_audit(tr, P_TRUE, mc)
    np.testing.assert_array_equal(audit.values[[0, 1, 3, 4, 5, 6]], 0.0)
    assert audit.values[2] < 1e-12


def test_residual_audit_detects_perturbation(traj_true, mc):
    tr = traj_true
    bumped = StateTrajectory(tr.N + 0.1, tr.C, tr.V, tr.S, tr.S_prime, tr.grid)
    base = residual_audit(tr, P_TRUE, mc).values[0]
    grown = residual_audit(bumped, P_TRUE, mc).values[0]
    assert 0.02 < grown - base < 0.5
