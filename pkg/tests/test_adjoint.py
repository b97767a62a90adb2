import numpy as np
import pytest

from tumour_adjoint.adjoint import (
    ShootingConfig,
    lambda4_explicit,
    shooting_residual,
    solve_adjoint,
    solve_lambda2_ode,
    solve_lambda3_bvp,
    solve_shooting_bvp,
    step_lambda1_backward,
    terminal_slice,
)
from tumour_adjoint.errors import CFLError
from tumour_adjoint.forward import solve_forward
from tumour_adjoint.grid import Grid

from conftest import P_START, P_TRUE


@pytest.fixture(scope="module")
def traj_start(ic34, grid, mc):
    return solve_forward(P_START, ic34, grid, mc)


@pytest.fixture(scope="module")
def adj_start(traj_start, obs_true, mc):
    return solve_adjoint(traj_start, obs_true, P_START, mc)


# --- shooting ----------------------------------------------------------------


def _manufactured(n, kappa):
    # u = y^2 (1 - y) is regular at the origin, u(1) = 0, u'(0) = 0, and
    # u'' - (2/y) u' + (2/y^2 - kappa) u = -2y - kappa u
    y = np.linspace(0, 1, n)
    exact = y**2 * (1 - y)
    kap = np.broadcast_to(kappa, y.shape)
    u, q = solve_shooting_bvp(kap, -2 * y - kap * exact)
    return np.max(np.abs(u - exact)), abs(q + 1.0)


def test_shooting_manufactured_linear_forcing():
    # kappa = 0 leaves a linear forcing, which the nodal data represent exactly
    err_u, err_q = _manufactured(30, 0.0)
    assert err_u < 1e-6 and err_q < 1e-5


@pytest.mark.parametrize("kappa", [0.5, 3.0])
def test_shooting_manufactured_second_order(kappa):
    # with kappa > 0 the forcing is cubic and only seen through its nodal
    # interpolant, so the solution is O(h^2) accurate
    errs = np.array([_manufactured(n, kappa)[0] for n in (16, 31, 61)])
    assert errs[1] < 3e-5
    assert np.all(np.log2(errs[:-1] / errs[1:]) > 1.9)


def test_shooting_homogeneous_problem_gives_zero():
    u, q = solve_shooting_bvp(np.full(30, 0.7), np.zeros(30))
    assert q == 0.0
    assert np.all(u == 0.0)


def test_shooting_residual_is_affine(traj_start, adj_start, mc):
    n = 20
    args = (adj_start.l1[n], adj_start.l2[n], traj_start.N[n], traj_start.C[n], traj_start.S[n], P_START, mc)
    q = np.array([-0.7, 0.2, 1.9])
    F = shooting_residual(q, *args)
    line = F[0] + (F[1] - F[0]) * (q[2] - q[0]) / (q[1] - q[0])
    assert abs(F[2] - line) / max(np.max(np.abs(F)), 1e-300) < 1e-8


def test_shooting_residual_vanishes_at_solution(traj_start, adj_start, mc):
    n = 10
    args = (adj_start.l1[n], adj_start.l2[n], traj_start.N[n], traj_start.C[n], traj_start.S[n], P_START, mc)
    l3, q = solve_lambda3_bvp(*args, return_q=True)
    F = shooting_residual(np.array([q, q + 1.0]), *args)
    assert abs(F[0]) < 1e-10 * abs(F[1] - F[0])
    np.testing.assert_allclose(l3, adj_start.l3[n], rtol=1e-10, atol=1e-14)


def test_epsilon_validation():
    with pytest.raises(ValueError):
        ShootingConfig(epsilon=0.5).eps_for(0.1)
    assert ShootingConfig().eps_for(1 / 29) == pytest.approx(1 / (29 * 256))


# --- lambda_2 ----------------------------------------------------------------


def test_lambda2_closed_form():
    # l2' - (2/y) l2 = g with l2(1) = -l4  =>  l2 = -g y + (g - l4) y^2
    n, S, l4 = 30, 4.0, 0.3
    y = np.linspace(0, 1, n)
    l1 = np.full(n, 2.0)
    Ny = np.full(n, -0.6)
    g = Ny[0] * l1[0] / S
    l2 = solve_lambda2_ode(l1, Ny, S, l4)
    np.testing.assert_allclose(l2, -g * y + (g - l4) * y**2, atol=1e-5)
    assert l2[-1] == -l4


def test_lambda2_second_order():
    errs = []
    for n in (31, 61, 121):
        y = np.linspace(0, 1, n)
        g = -0.3
        l2 = solve_lambda2_ode(np.full(n, 1.0), np.full(n, -0.3), 1.0, 0.3)
        errs.append(np.max(np.abs(l2 - (-g * y + (g - 0.3) * y**2))))
    errs = np.array(errs)
    assert np.all(np.log2(errs[:-1] / errs[1:]) > 1.9)


def test_lambda2_homogeneous_case():
    # no forcing: l2 = -l4 y^2
    y = np.linspace(0, 1, 30)
    l2 = solve_lambda2_ode(np.zeros(30), np.ones(30), 3.0, 0.25)
    np.testing.assert_allclose(l2, -0.25 * y**2, atol=1e-6)


# --- marching ----------------------------------------------------------------


def test_terminal_slice_is_zero(traj_true):
    l1, l2, l3, l4 = terminal_slice(traj_true)
    assert np.all(l1 == 0) and np.all(l2 == 0) and np.all(l3 == 0) and l4 == 0


def test_terminal_values_exact(adj_start):
    assert np.all(adj_start.l1[-1] == 0) and np.all(adj_start.l2[-1] == 0)
    assert np.all(adj_start.l3[-1] == 0) and adj_start.l4[-1] == 0


def test_lambda2_boundary_matches_lambda4(adj_start):
    np.testing.assert_array_equal(adj_start.l2[:, -1] + adj_start.l4, 0.0)


def test_lambda3_boundary_condition(adj_start):
    assert np.all(adj_start.l3[:, -1] == 0.0)


def test_exact_fit_multipliers_vanish(traj_true, obs_true, mc):
    adj = solve_adjoint(traj_true, obs_true, P_TRUE, mc)
    for field in (adj.l1, adj.l2, adj.l3, adj.l4):
        assert np.max(np.abs(field)) < 1e-10


def test_lambda4_stepped_matches_explicit(traj_start, adj_start, obs_true, mc):
    explicit = lambda4_explicit(traj_start, adj_start, obs_true, P_START, mc)
    peak_rate = np.max(np.abs(adj_start.l4_rate))
    dt = traj_start.grid.dt
    assert np.max(np.abs(explicit - adj_start.l4)) <= 5 * dt * peak_rate


def test_adjoint_is_linear_in_the_data_misfit(traj_start, obs_true, mc):
    # doubling both weights doubles every multiplier
    a1 = solve_adjoint(traj_start, obs_true, P_START, mc)
    a2 = solve_adjoint(traj_start, obs_true, P_START, mc, mu1=2 * obs_true.mu1, mu2=2 * obs_true.mu2)
    for f1, f2 in ((a1.l1, a2.l1), (a1.l2, a2.l2), (a1.l3, a2.l3), (a1.l4, a2.l4)):
        np.testing.assert_allclose(f2, 2 * f1, rtol=1e-7, atol=1e-12)


def test_auxiliary_multipliers(adj_start, traj_start):
    assert adj_start.l5.shape == (traj_start.grid.n_t + 1,)
    np.testing.assert_array_equal(adj_start.l5, adj_start.l2[:, 0])
    np.testing.assert_array_equal(adj_start.l8, adj_start.l1[0])
    np.testing.assert_array_equal(adj_start.l7, 3 * adj_start.l3[:, 0])
    assert np.isfinite(adj_start.l9)


def test_lambda1_step_cfl_guard(traj_start, mc):
    tr = traj_start
    coarse = Grid(n_y=tr.grid.n_y, dt=5.0, n_t=1)
    z = np.zeros(tr.grid.n_y)
    with pytest.raises(CFLError):
        step_lambda1_backward(z, tr.N[0], tr.C[0], tr.V[0], tr.S[0], tr.S_prime[0], z, z, tr.N[0], 100.0,
                              P_START, mc, coarse)


def test_mismatched_observations_rejected(traj_start, mc):
    from tumour_adjoint.objective import Observations

    bad = Observations(np.zeros((3, 30)), np.zeros(3))
    with pytest.raises(ValueError):
        solve_adjoint(traj_start, bad, P_START, mc)
