"""Independent checks of the solvers: finite-difference gradients and residual audits."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .adjoint import ShootingConfig
from .forward import InitialCondition, SolverConfig, StateTrajectory, radial_laplacian, solve_forward, upwind_gradient
from .forward import advection_speed
from .grid import Grid
from .kinetics import ModelConstants, Parameters, rates
from .objective import Observations, eval_J, reduced_objective

__all__ = [
    "GradCheckReport",
    "fd_gradient",
    "grad_check",
    "ResidualAudit",
    "residual_audit",
    "RESIDUAL_ROWS",
]

FLOOR = 1e-12


def fd_gradient(p, ic: InitialCondition = None, obs: Observations = None, grid: Grid = None,
                mc: ModelConstants = ModelConstants(), cfg: SolverConfig = SolverConfig(), h=1e-5,
                objective: Callable | None = None) -> np.ndarray:
    """Central finite-difference gradient of the misfit.

    Each component costs two forward solves.  ``objective`` replaces the
    misfit by any scalar function of the parameter array (a test seam).
    """
    x = np.asarray(p.as_array() if isinstance(p, Parameters) else p, dtype=float)
    if objective is None:
        def objective(z):
            return eval_J(solve_forward(Parameters.from_array(z), ic, grid, mc, cfg), obs)

    g = np.empty_like(x)
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (objective(x + e) - objective(x - e)) / (2.0 * h)
    return g


@dataclass
class GradCheckReport:
    """Comparison of the adjoint gradient against central differences.

    A component passes if its relative error is below ``rtol``, or if the two
    values agree to ``atol`` in absolute terms.  The second clause covers the
    exact-fit point, where the adjoint gradient is exactly zero but the
    central difference still carries an O(h^2) third-derivative remainder.
    """

    p: np.ndarray
    adjoint_gradient: np.ndarray
    fd_gradient: np.ndarray
    h: float
    rtol: float = 1e-2
    atol: float = 1e-7
    floor: float = FLOOR
    relative_errors: np.ndarray = field(init=False)

    def __post_init__(self):
        diff = np.abs(self.adjoint_gradient - self.fd_gradient)
        self.relative_errors = diff / np.maximum(np.abs(self.fd_gradient), self.floor)

    @property
    def component_pass(self) -> np.ndarray:
        diff = np.abs(self.adjoint_gradient - self.fd_gradient)
        return (self.relative_errors < self.rtol) | (diff < self.atol)

    @property
    def passed(self) -> bool:
        return bool(np.all(self.component_pass))

    def as_dict(self):
        return {
            "p": self.p.tolist(),
            "adjoint_gradient": self.adjoint_gradient.tolist(),
            "fd_gradient": self.fd_gradient.tolist(),
            "relative_errors": self.relative_errors.tolist(),
            "h": self.h,
            "rtol": self.rtol,
            "atol": self.atol,
            "passed": self.passed,
        }


def grad_check(p: Parameters, ic: InitialCondition, obs: Observations, grid: Grid,
               mc: ModelConstants = ModelConstants(), cfg: SolverConfig = SolverConfig(),
               sc: ShootingConfig = ShootingConfig(), h=1e-5, rtol=1e-2, atol=1e-7,
               flip_lambda2=False) -> GradCheckReport:
    """Run one adjoint gradient and one finite-difference gradient and compare them."""
    _, ga = reduced_objective(p, ic, obs, grid, mc, cfg, sc, flip_lambda2=flip_lambda2)
    gfd = fd_gradient(p, ic, obs, grid, mc, cfg, h)
    return GradCheckReport(p.as_array(), ga, gfd, h, rtol=rtol, atol=atol)


# --- residual audit ----------------------------------------------------------

RESIDUAL_ROWS = (
    "density",
    "velocity",
    "nutrient",
    "radius",
    "velocity_origin",
    "nutrient_boundary",
    "nutrient_symmetry",
    "initial_density",
    "initial_radius",
)


@dataclass
class ResidualAudit:
    """Max-norm residual of each row of the state operator.

    ``scales`` are the magnitudes of the largest term in each row; relative
    residuals are ``values / max(scales, 1)``.
    """

    values: np.ndarray
    scales: np.ndarray

    @property
    def relative(self) -> np.ndarray:
        return self.values / np.maximum(self.scales, 1.0)

    def as_dict(self):
        return {name: float(v) for name, v in zip(RESIDUAL_ROWS, self.values)}


def _moment_form_velocity(V, src, y):
    # integrated form y^2 V - int_0^y s^2 src ds, with trapezoid on s^2 src
    f = y**2 * src
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(y))))
    return y**2 * V - cum


def residual_audit(traj: StateTrajectory, p: Parameters, mc: ModelConstants = ModelConstants(),
                   grid: Grid | None = None, ic: InitialCondition | None = None) -> ResidualAudit:
    """Evaluate the nine rows of the state operator on a trajectory.

    The differential rows use the discrete operators of the forward scheme,
    except that the velocity row is checked in integrated form with plain
    trapezoid quadrature (a different rule than the solver uses, so its
    residual is a quadrature-error estimate) and the symmetry row uses a
    one-sided second-order difference.  Without ``ic`` the initial rows are
    measured against the trajectory itself and are zero.
    """
    grid = traj.grid if grid is None else grid
    N, C, V, S, Sp = traj.N, traj.C, traj.V, traj.S, traj.S_prime
    h, dt, y = grid.h, grid.dt, grid.y
    n_t = N.shape[0] - 1
    r = rates(C, p, mc)

    res = np.zeros(9)
    scale = np.zeros(9)

    # density: forward difference in time, upwind in space
    for n in range(n_t):
        w = advection_speed(V[n], S[n], Sp[n])
        Ny = upwind_gradient(N[n], w, h)
        Nt = (N[n + 1] - N[n]) / dt
        react = N[n] * (r.a[n] - r.b[n] * N[n])
        res[0] = max(res[0], np.max(np.abs(Nt + w * Ny - react)))
        scale[0] = max(scale[0], np.max(np.abs(Nt)), np.max(np.abs(react)))

    for n in range(n_t + 1):
        src = r.b[n] * N[n] * S[n]
        res[1] = max(res[1], np.max(np.abs(_moment_form_velocity(V[n], src, y))))
        scale[1] = max(scale[1], np.max(np.abs(y**2 * V[n])))
        lap = radial_laplacian(C[n], h)[:-1]
        sink = r.k[n, :-1] * S[n] ** 2 * N[n, :-1]
        res[2] = max(res[2], np.max(np.abs(lap - sink)))
        scale[2] = max(scale[2], np.max(np.abs(sink)))

    S_dot = np.diff(S) / dt
    res[3] = np.max(np.abs(V[:-1, -1] - S_dot)) if n_t > 0 else 0.0
    scale[3] = np.max(np.abs(V[:, -1]))
    res[4] = np.max(np.abs(V[:, 0]))
    res[5] = np.max(np.abs(C[:, -1] - 1.0))
    scale[5] = 1.0
    if N.shape[1] >= 3:
        res[6] = np.max(np.abs(-3 * C[:, 0] + 4 * C[:, 1] - C[:, 2]) / (2 * h))
    if ic is not None:
        res[7] = np.max(np.abs(N[0] - ic.N0))
        res[8] = abs(S[0] - ic.S0)
        scale[8] = ic.S0
    return ResidualAudit(res, scale)
