"""Direct problem on the front-fixed domain.

With ``y = r/S(t)`` the free-boundary system becomes, on 0 < y <= 1::

    N_t + (V - y S')/S N_y = N (a(C) - b(C) N)
    C_yy + (2/y) C_y       = k(C) S^2 N,     C_y(0) = 0,  C(1) = 1
    V_y + (2/y) V          = b(C) N S,       V(0) = 0
    S'                     = V(1)

Each time level solves the quasi-steady nutrient problem (Picard iteration
around a tridiagonal solve), integrates the velocity, then advances ``N``
with first-order upwinding and ``S`` with forward Euler.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import CFLError, CollapseError, ConvergenceError
from .grid import Grid
from .kinetics import ModelConstants, Parameters, rate_b, rates

__all__ = [
    "SolverConfig",
    "InitialCondition",
    "StateTrajectory",
    "solve_nutrient",
    "solve_velocity",
    "upwind_gradient",
    "advection_speed",
    "step_density",
    "step_radius",
    "solve_forward",
    "grow_from_seed",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    bvp_tol: float = 1e-10
    max_picard: int = 100
    residual_tol: float = 1e-6
    max_seed_time: float = 50.0


@dataclass(frozen=True)
class InitialCondition:
    N0: np.ndarray
    S0: float

    def __post_init__(self):
        N0 = np.asarray(self.N0, dtype=float)
        if np.any(N0 < 0) or np.any(N0 > 1):
            raise ValueError("initial density must lie in [0, 1]")
        if not self.S0 > 0:
            raise ValueError(f"initial radius must be positive, got {self.S0}")
        object.__setattr__(self, "N0", N0)


@dataclass
class StateTrajectory:
    """Forward solution; space-time fields have shape ``(n_t + 1, n_y)``."""

    N: np.ndarray
    C: np.ndarray
    V: np.ndarray
    S: np.ndarray
    S_prime: np.ndarray
    grid: Grid


# --- nutrient ----------------------------------------------------------------


def _radial_bands(n, h):
    """Bands of the finite-volume stencil for C_yy + (2/y) C_y on n nodes.

    Node i owns the shell [y_{i-1/2}, y_{i+1/2}]; face fluxes y^2 C_y are
    divided by the shell volume, whose scaled form is i^2 + 1/12, so the
    stencil is exact on quadratics.  Row 0 (the ball of radius h/2) reduces
    to the symmetry limit 3 C_yy with the ghost value C_{-1} = C_1.  The
    last row is left for the Dirichlet condition.
    """
    i = np.arange(1, n - 1, dtype=float)
    vol = i**2 + 1.0 / 12.0
    lo = (i - 0.5) ** 2 / (vol * h**2)
    up = (i + 0.5) ** 2 / (vol * h**2)
    lower = np.zeros(n)
    diag = np.zeros(n)
    upper = np.zeros(n)
    diag[0], upper[0] = -6.0 / h**2, 6.0 / h**2
    lower[1 : n - 1], diag[1 : n - 1], upper[1 : n - 1] = lo, -(lo + up), up
    return lower, diag, upper


def radial_laplacian(u, h):
    """Apply the discrete ``u_yy + (2/y) u_y`` (interior and origin rows).

    Written as weighted differences so that constants map to exactly zero.
    """
    u = np.asarray(u, dtype=float)
    lower, _, upper = _radial_bands(len(u), h)
    du = np.diff(u)
    out = np.full(len(u), np.nan)
    out[:-1] = upper[:-1] * du
    out[1:-1] -= lower[1:-1] * du[:-1]
    return out


def _solve_radial_bvp(coef, rhs, h, boundary=1.0):
    """Solve ``u_yy + (2/y) u_y - coef u = rhs`` with ``u_y(0) = 0``, ``u(1) = boundary``."""
    n = len(coef)
    lower, diag, upper = _radial_bands(n, h)
    diag = diag - coef
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    # Dirichlet row
    ab[1, -1] = 1.0
    ab[2, -2] = 0.0
    b = np.array(rhs, dtype=float)
    b[-1] = boundary
    return solve_banded((1, 1), ab, b)


def solve_nutrient(N_slice, S, p: Parameters, mc: ModelConstants, cfg: SolverConfig = SolverConfig(), C_init=None):
    """Quasi-steady nutrient profile for one time level.

    The consumption ``k(C) S^2 N`` is written as ``[beta_hat_a S^2 N/(c_c + C)] C``
    and the bracket is lagged, so every Picard sweep is a linear tridiagonal
    solve with a non-negative reaction coefficient (an M-matrix), which keeps
    ``0 <= C <= 1``.  Each sweep solves for the deficit ``C - 1``, so a slice
    without cells returns ``C = 1`` exactly.

    Raises
    ------
    ConvergenceError
        If the sweeps do not settle below ``cfg.bvp_tol`` (max norm) within
        ``cfg.max_picard`` iterations.
    """
    N_slice = np.asarray(N_slice, dtype=float)
    n = len(N_slice)
    h = 1.0 / (n - 1)
    C = np.ones(n) if C_init is None else np.array(C_init, dtype=float)
    scale = mc.beta_hat_a * S**2 * N_slice
    diff = np.inf
    for _ in range(cfg.max_picard):
        coef = scale / (p.c_c + C)
        C_new = 1.0 + _solve_radial_bvp(coef, coef, h, boundary=0.0)
        np.clip(C_new, 0.0, None, out=C_new)  # guards roundoff-level negatives only
        diff = np.max(np.abs(C_new - C))
        C = C_new
        if diff < cfg.bvp_tol:
            C[-1] = 1.0
            return C
    raise ConvergenceError(
        f"nutrient iteration did not converge in {cfg.max_picard} sweeps (last change {diff:.3e})",
        residual=diff,
    )


# --- velocity ----------------------------------------------------------------


def _cumulative_moment(f, h):
    """``int_0^{y_i} s^2 f(s) ds`` for piecewise-linear ``f``, exact per cell."""
    n = len(f)
    y0 = h * np.arange(n - 1)
    y1 = y0 + h
    d3 = (y1**3 - y0**3) / 3.0
    d4 = (y1**4 - y0**4) / 4.0
    w0 = (y1 * d3 - d4) / h
    w1 = (d4 - y0 * d3) / h
    out = np.zeros(n)
    out[1:] = np.cumsum(w0 * f[:-1] + w1 * f[1:])
    return out


def solve_velocity(N_slice, C_slice, S, p: Parameters, mc: ModelConstants):
    """Velocity from ``(y^2 V)_y = y^2 b(C) N S`` with ``V(0) = 0``."""
    N_slice = np.asarray(N_slice, dtype=float)
    C_slice = np.asarray(C_slice, dtype=float)
    if N_slice.shape != C_slice.shape:
        raise ValueError("N and C slices must share the grid")
    n = len(N_slice)
    h = 1.0 / (n - 1)
    src = rate_b(C_slice, p, mc) * N_slice * S
    V = np.zeros(n)
    y = h * np.arange(n)
    V[1:] = _cumulative_moment(src, h)[1:] / y[1:] ** 2
    return V


# --- density and radius ------------------------------------------------------


def advection_speed(V_slice, S, S_prime):
    """Transport speed ``(V - y S')/S`` of the front-fixed density equation."""
    y = np.linspace(0.0, 1.0, len(V_slice))
    return (V_slice - y * S_prime) / S


def upwind_gradient(u, w, h):
    """One-sided derivative of ``u`` taken from the upwind side of ``w``.

    Nodes with ``w == 0`` (both boundaries, where the speed vanishes exactly)
    get a centred or one-sided value that is multiplied by zero anyway.
    """
    back = np.empty_like(u)
    fwd = np.empty_like(u)
    back[1:] = (u[1:] - u[:-1]) / h
    back[0] = (u[1] - u[0]) / h
    fwd[:-1] = (u[1:] - u[:-1]) / h
    fwd[-1] = back[-1]
    return np.where(w > 0, back, fwd)


def step_density(N_slice, C_slice, V_slice, S, S_prime, p: Parameters, mc: ModelConstants, grid: Grid):
    """Advance ``N`` by one explicit step (upwind advection, explicit logistic reaction)."""
    h, dt = grid.h, grid.dt
    w = advection_speed(V_slice, S, S_prime)
    courant = np.max(np.abs(w)) * dt / h
    if courant > 1.0:
        raise CFLError(courant)
    r = rates(C_slice, p, mc)
    Ny = upwind_gradient(N_slice, w, h)
    return N_slice + dt * (-w * Ny + N_slice * (r.a - r.b * N_slice))


def step_radius(S, V_boundary, dt):
    S_new = S + dt * V_boundary
    if not S_new > 0:
        raise CollapseError(f"radius collapsed to {S_new:.4g}")
    return S_new


def solve_forward(p: Parameters, ic: InitialCondition, grid: Grid, mc: ModelConstants = ModelConstants(),
                  cfg: SolverConfig = SolverConfig()) -> StateTrajectory:
    """March the direct problem over ``grid.n_t`` steps."""
    n_t, n_y = grid.n_t, grid.n_y
    if len(ic.N0) != n_y:
        raise ValueError(f"initial density has {len(ic.N0)} nodes, grid has {n_y}")
    N = np.empty((n_t + 1, n_y))
    C = np.empty_like(N)
    V = np.empty_like(N)
    S = np.empty(n_t + 1)
    Sp = np.empty(n_t + 1)
    N[0], S[0] = ic.N0, ic.S0
    C_prev = None
    for n in range(n_t + 1):
        C[n] = C_prev = solve_nutrient(N[n], S[n], p, mc, cfg, C_init=C_prev)
        V[n] = solve_velocity(N[n], C[n], S[n], p, mc)
        Sp[n] = V[n, -1]
        if n < n_t:
            N[n + 1] = step_density(N[n], C[n], V[n], S[n], Sp[n], p, mc, grid)
            S[n + 1] = step_radius(S[n], Sp[n], grid.dt)
    lo, hi = N.min(), N.max()
    if lo < -1e-12 or hi > 1 + 1e-12:
        log.warning("live-cell fraction left [0, 1]: min %.3e, max %.6f", lo, hi)
    return StateTrajectory(N=N, C=C, V=V, S=S, S_prime=Sp, grid=grid)


def grow_from_seed(p: Parameters, mc: ModelConstants, cfg: SolverConfig, target_S: float,
                   grid: Grid = Grid()) -> InitialCondition:
    """Grow a one-cell seed (``S = 1``, ``N = 1``) until the radius reaches ``target_S``.

    Uses the spatial resolution and time step of ``grid``; the returned state
    is the first time level with ``S >= target_S``.
    """
    if target_S < 1:
        raise ValueError(f"target radius must be >= 1, got {target_S}")
    N = np.ones(grid.n_y)
    S = 1.0
    if target_S <= 1:
        return InitialCondition(N, S)
    t = 0.0
    C = None
    while S < target_S:
        if t > cfg.max_seed_time:
            raise ConvergenceError(f"seed reached S={S:.3f} < {target_S} by t={t:.2f}")
        C = solve_nutrient(N, S, p, mc, cfg, C_init=C)
        V = solve_velocity(N, C, S, p, mc)
        N = step_density(N, C, V, S, V[-1], p, mc, grid)
        S = step_radius(S, V[-1], grid.dt)
        t += grid.dt
    log.debug("seed grew to S=%.4f after t=%.3f", S, t)
    return InitialCondition(np.clip(N, 0.0, 1.0), S)
