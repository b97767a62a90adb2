"""Misfit functional and its adjoint gradient with respect to ``(c_c, c_d, sigma)``.

The misfit is::

    J = mu1/2 int_0^T int_0^1 (N - N*)^2 dy dt + mu2/2 int_0^T (S - S*)^2 dt

It depends on the parameters only through the state, so the reduced gradient
is the action of the parameter derivative of the state operator on the
multipliers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adjoint import AdjointTrajectory, ShootingConfig, solve_adjoint
from .forward import InitialCondition, SolverConfig, StateTrajectory, solve_forward
from .grid import Grid, time_trapezoid, trapezoid
from .kinetics import PARAM_NAMES, ModelConstants, Parameters, rates_dp

__all__ = [
    "Observations",
    "eval_J",
    "assemble_gradient",
    "reduced_objective",
    "gradient_time_weights",
    "SweepResult",
    "sweep_objective",
]


@dataclass
class Observations:
    """Samples ``N*(y_j, t_k)`` and ``S*(t_k)`` on the solver grid, with misfit weights."""

    N_star: np.ndarray
    S_star: np.ndarray
    mu1: float = 100.0
    mu2: float = 1.0

    def __post_init__(self):
        self.N_star = np.asarray(self.N_star, dtype=float)
        self.S_star = np.asarray(self.S_star, dtype=float)
        if self.N_star.ndim != 2 or self.S_star.shape != (self.N_star.shape[0],):
            raise ValueError("N_star must be (n_t+1, n_y) and S_star (n_t+1,)")
        if self.mu1 < 0 or self.mu2 < 0 or (self.mu1 == 0 and self.mu2 == 0):
            raise ValueError("weights must be non-negative and not both zero")

    def check_grid(self, grid: Grid):
        if self.N_star.shape != (grid.n_t + 1, grid.n_y):
            raise ValueError(f"observations have shape {self.N_star.shape}, grid needs {(grid.n_t + 1, grid.n_y)}")

    @classmethod
    def from_trajectory(cls, traj: StateTrajectory, mu1=100.0, mu2=1.0):
        return cls(traj.N.copy(), traj.S.copy(), mu1, mu2)


def eval_J(traj: StateTrajectory, obs: Observations) -> float:
    obs.check_grid(traj.grid)
    grid = traj.grid
    dN = trapezoid((traj.N - obs.N_star) ** 2, grid)
    dS = (traj.S - obs.S_star) ** 2
    return float(0.5 * obs.mu1 * time_trapezoid(dN, grid) + 0.5 * obs.mu2 * time_trapezoid(dS, grid))


def gradient_time_weights(grid: Grid) -> np.ndarray:
    """Time quadrature for the gradient integral.

    Multipliers at level ``t_n`` act on the forward step ``t_n -> t_n + dt``,
    so the rule is the left-endpoint sum that is dual to forward Euler: weight
    ``dt`` on levels ``0..n_t-1`` and none on ``T`` (where all multipliers
    vanish anyway).
    """
    w = np.full(grid.n_t + 1, grid.dt)
    w[-1] = 0.0
    return w


def assemble_gradient(traj: StateTrajectory, adj: AdjointTrajectory, p: Parameters,
                      mc: ModelConstants = ModelConstants(), flip_lambda2=False) -> np.ndarray:
    """Reduced gradient ``dJ/d(c_c, c_d, sigma)`` from a matching state/multiplier pair.

    ``flip_lambda2`` reverses the sign of the velocity-row contribution; it
    exists only to show that the finite-difference check catches such faults.
    """
    grid = traj.grid
    N, S = traj.N, traj.S[:, None]
    D = rates_dp(traj.C, p, mc)  # (rate, param, t, y)
    s2 = -1.0 if flip_lambda2 else 1.0
    integrand = (
        -adj.l1 * N * (D[0] - N * D[1])
        - s2 * adj.l2 * N * S * D[1]
        - adj.l3 * N * S**2 * D[2]
    )  # (param, t, y)
    per_level = trapezoid(integrand, grid)
    return per_level @ gradient_time_weights(grid)


def reduced_objective(p: Parameters, ic: InitialCondition, obs: Observations, grid: Grid,
                      mc: ModelConstants = ModelConstants(), cfg: SolverConfig = SolverConfig(),
                      sc: ShootingConfig = ShootingConfig(), flip_lambda2=False):
    """One forward solve, one adjoint solve and the assembly: returns ``(J, grad)``."""
    traj = solve_forward(p, ic, grid, mc, cfg)
    J = eval_J(traj, obs)
    adj = solve_adjoint(traj, obs, p, mc, sc)
    return J, assemble_gradient(traj, adj, p, mc, flip_lambda2=flip_lambda2)


@dataclass
class SweepResult:
    """Misfit sampled on a tensor grid of two parameters, the third held fixed.

    ``J[i, j]`` belongs to ``(x[i], y[j])``.
    """

    x_name: str
    y_name: str
    x: np.ndarray
    y: np.ndarray
    fixed_name: str
    fixed_value: float
    J: np.ndarray

    @property
    def argmin(self):
        return np.unravel_index(int(np.argmin(self.J)), self.J.shape)

    @property
    def argmin_cell(self):
        """Box between the neighbours of the best node, ``((x_lo, x_hi), (y_lo, y_hi))``.

        For a misfit that is unimodal along each axis the continuous minimiser
        must lie in this box, which is as far as sampled values can localise it.
        """
        i, j = self.argmin

        def span(v, k):
            return float(v[max(k - 1, 0)]), float(v[min(k + 1, len(v) - 1)])

        return span(self.x, i), span(self.y, j)

    def cell_contains(self, x0, y0) -> bool:
        (xl, xh), (yl, yh) = self.argmin_cell
        return xl <= x0 <= xh and yl <= y0 <= yh

    def variation(self, axis, rel_range=None):
        """Spread ``max J - min J`` along one axis through the best node.

        ``rel_range`` keeps only samples within that relative distance of the
        best node's coordinate, so two axes can be compared over matched
        relative ranges.
        """
        i, j = self.argmin
        if axis == 0:
            v, line, centre = self.x, self.J[:, j], self.x[i]
        else:
            v, line, centre = self.y, self.J[i, :], self.y[j]
        if rel_range is not None:
            line = line[np.abs(v / centre - 1.0) <= rel_range]
        return float(np.ptp(line))


def sweep_objective(ic: InitialCondition, obs: Observations, grid: Grid, axes: dict,
                    mc: ModelConstants = ModelConstants(), cfg: SolverConfig = SolverConfig()) -> SweepResult:
    """Evaluate the misfit on a tensor grid.

    ``axes`` maps each parameter name to ``(lo, hi, n)`` (a swept axis, in
    parameter order) or a number (the fixed parameter).
    """
    ranged = [k for k in PARAM_NAMES if not np.isscalar(axes[k])]
    fixed = [k for k in PARAM_NAMES if np.isscalar(axes[k])]
    if len(ranged) != 2 or len(fixed) != 1:
        raise ValueError("need exactly two swept parameters and one fixed value")
    xs = [np.linspace(float(lo), float(hi), int(n)) for lo, hi, n in (axes[k] for k in ranged)]
    J = np.empty((len(xs[0]), len(xs[1])))
    for i, a in enumerate(xs[0]):
        for j, b in enumerate(xs[1]):
            vals = {ranged[0]: a, ranged[1]: b, fixed[0]: float(axes[fixed[0]])}
            p = Parameters(**vals)
            J[i, j] = eval_J(solve_forward(p, ic, grid, mc, cfg), obs)
    return SweepResult(ranged[0], ranged[1], xs[0], xs[1], fixed[0], float(axes[fixed[0]]), J)
