"""Backward-in-time solver for the Lagrange multipliers of the direct problem.

Multipliers pair with the rows of the state operator: ``l1`` with the
density equation, ``l2`` with the velocity equation, ``l3`` with the
nutrient equation and ``l4`` with ``V(1) - S'``.  Per time level the march is

    l1 explicit backward step -> l4 step -> l2(1) = -l4 -> l2 ODE -> l3 BVP

``l3`` solves a second-order problem with a regular-singular point at the
origin; it is obtained by shooting on the slope ``q = l3_y(1)`` from ``y = 1``
down to ``y = eps``, extending to ``y = 0`` with first-order Taylor steps and
zeroing ``F(q) = l3_y(0)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING

import numpy as np

from .errors import CFLError, ConvergenceError, SolverError
from .forward import StateTrajectory, advection_speed, upwind_gradient
from .grid import Grid, trapezoid, trapezoid_weights
from .kinetics import ModelConstants, Parameters, rates, rates_dC

if TYPE_CHECKING:
    from .objective import Observations

__all__ = [
    "ShootingConfig",
    "AdjointTrajectory",
    "terminal_slice",
    "solve_lambda2_ode",
    "solve_lambda3_bvp",
    "solve_shooting_bvp",
    "shooting_residual",
    "step_lambda1_backward",
    "step_lambda4_backward",
    "lambda4_explicit",
    "auxiliary_multipliers",
    "solve_adjoint",
]


@dataclass(frozen=True)
class ShootingConfig:
    """Settings of the origin cut-off and the root search on ``q``.

    ``epsilon=None`` means ``h/256``.  Near the origin ``l3_y`` varies like
    ``y log y``, so the Taylor extension to ``y = 0`` is only O(eps) accurate
    and the cut-off has to sit well inside the first cell.
    """

    epsilon: float | None = None
    root_tol: float = 1e-12
    bracket: tuple[float, float] = (-1.0, 1.0)
    max_root_iter: int = 60

    def eps_for(self, h):
        eps = h / 256.0 if self.epsilon is None else self.epsilon
        if not 0 < eps < 3 * h:
            raise ValueError(f"epsilon must lie in (0, 3h) = (0, {3 * h:g}), got {eps}")
        return eps


@dataclass
class AdjointTrajectory:
    l1: np.ndarray
    l2: np.ndarray
    l3: np.ndarray
    l4: np.ndarray
    l5: np.ndarray | None = None
    l6: np.ndarray | None = None
    l7: np.ndarray | None = None
    l8: np.ndarray | None = None
    l9: float | None = None
    q_hat: np.ndarray | None = None
    l4_rate: np.ndarray | None = field(default=None, repr=False)


# --- one-dimensional inward integrators -----------------------------------

SUBSTEP_RATIO = 8.0


@lru_cache(maxsize=64)
def _schedule(n, h, eps):
    """Inward RK4 steps from y = 1 to ``eps`` and their stage abscissae.

    Between nodes the step is at most ``y / SUBSTEP_RATIO`` (the coefficients
    scale like 1/y).  Below the first node ``k >= 1`` the equation is
    equidimensional, so the remaining stretch is covered by geometric steps
    of relative size ``1/SUBSTEP_RATIO``.

    Returns ``(steps, stages, k)``: ``steps`` holds ``(y, dy, node)`` with
    ``node`` the grid index reached by the step (or -1), ``stages`` the
    ``(len(steps), 3)`` array of ``y, y + dy/2, y + dy``.
    """
    k = max(int(np.ceil(eps / h - 1e-12)), 1)
    steps = []
    for i in range(n - 1, k, -1):
        m = max(1, int(np.ceil(SUBSTEP_RATIO / (i - 1))))
        for j in range(m):
            y = h * (i - j / m)
            steps.append((y, -h / m, i - 1 if j == m - 1 else -1))
    y = k * h
    shrink = 1.0 - 1.0 / SUBSTEP_RATIO
    while y > eps * (1 + 1e-12):
        y_next = max(shrink * y, eps)
        steps.append((y, y_next - y, -1))
        y = y_next
    stages = np.array([(y, y + 0.5 * dy, y + dy) for y, dy, _ in steps]).reshape(-1, 3)
    return tuple(steps), stages, k


def _rk4_inward(rhs, z_top, fields, n, h, eps):
    """Classical RK4 for ``z' = rhs(y, z, *c)`` from y = 1 to ``eps``.

    ``fields`` are nodal coefficient arrays; ``c`` are their piecewise-linear
    interpolants at ``y``.  ``z_top`` is the state at y = 1 (any trailing
    shape).  Returns the nodal states for nodes ``k..n-1`` (index aligned
    with the grid, NaN below ``k``), the state at ``eps`` and ``k``.
    """
    steps, stages, k = _schedule(n, h, eps)
    nodes = h * np.arange(n)
    vals = [np.interp(stages, nodes, f) for f in fields]
    z = np.array(z_top, dtype=float)
    out = np.full((n,) + z.shape, np.nan)
    out[n - 1] = z
    for s, (y, dy, node) in enumerate(steps):
        c0, c1, c2 = ([v[s, j] for v in vals] for j in range(3))
        k1 = rhs(y, z, *c0)
        k2 = rhs(y + 0.5 * dy, z + 0.5 * dy * k1, *c1)
        k3 = rhs(y + 0.5 * dy, z + 0.5 * dy * k2, *c1)
        k4 = rhs(y + dy, z + dy * k3, *c2)
        z = z + dy / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if node >= 0:
            out[node] = z
    return out, z, k


def _at(fields, y, h):
    nodes = h * np.arange(len(fields[0]))
    return [float(np.interp(y, nodes, f)) for f in fields]


# --- lambda_2 ----------------------------------------------------------------


def solve_lambda2_ode(l1_slice, N_y, S, l4_t, sc: ShootingConfig = ShootingConfig()):
    """Solve ``l2_y - (2/y) l2 = (N_y/S) l1`` with ``l2(1) = -l4``.

    ``N_y`` is the discrete density gradient used by the forward stepper.
    """
    l1_slice = np.asarray(l1_slice, dtype=float)
    n = len(l1_slice)
    h = 1.0 / (n - 1)
    eps = sc.eps_for(h)
    fields = [np.asarray(N_y) * l1_slice / S]

    def rhs(y, lam, f):
        return 2.0 * lam / y + f

    out, l_eps, k = _rk4_inward(rhs, -l4_t, fields, n, h, eps)
    if not np.all(np.isfinite(out[k:])):
        raise SolverError("lambda_2 integration produced non-finite values")
    slope = rhs(eps, l_eps, *_at(fields, eps, h))
    y = h * np.arange(n)
    below = y < k * h
    out[below] = l_eps + (y[below] - eps) * slope
    return out


# --- lambda_3 shooting -------------------------------------------------------


def _lambda3_coefficients(l1_slice, l2_slice, N, C, S, p, mc):
    da, db, dk = rates_dC(C, p, mc)
    kappa = N * S**2 * dk
    forcing = N * (da - db * N) * l1_slice + N * S * db * l2_slice
    return kappa, forcing


def _shoot(q, kappa, forcing, h, eps):
    """Integrate the first-order form of the l3 equation for slopes ``q``.

    Returns nodal ``u`` (shape ``(n, m)``) and ``F(q) = v_q(0)``.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    n = len(kappa)
    fields = [kappa, forcing]

    def rhs(y, z, kap, frc):
        u, v = z
        return np.array([v, 2.0 * v / y - (2.0 / y**2 - kap) * u + frc])

    z_top = np.array([np.zeros_like(q), q])
    out, z_eps, k = _rk4_inward(rhs, z_top, fields, n, h, eps)
    if not np.all(np.isfinite(z_eps)):
        raise SolverError("lambda_3 shooting integration blew up")
    u_eps, v_eps = z_eps
    du, dv = rhs(eps, z_eps, *_at(fields, eps, h))
    y = h * np.arange(n)
    u = out[:, 0, :]
    for j in range(k):
        u[j] = u_eps + (y[j] - eps) * du
    # F(q): Taylor extension of v to the origin
    F = v_eps - eps * dv
    return u, F


def shooting_residual(q, l1_slice, l2_slice, N, C, S, p, mc, sc: ShootingConfig = ShootingConfig()):
    """``F(q) = v_q(0)`` for the l3 problem at one time level (vectorised in ``q``)."""
    h = 1.0 / (len(N) - 1)
    kappa, forcing = _lambda3_coefficients(l1_slice, l2_slice, N, C, S, p, mc)
    return _shoot(q, kappa, forcing, h, sc.eps_for(h))[1]


def solve_shooting_bvp(kappa, forcing, sc: ShootingConfig = ShootingConfig()):
    """Solve ``u'' - (2/y) u' + (2/y^2 - kappa) u = forcing`` on [0, 1]
    with ``u(1) = 0`` and ``u'(0) = 0``.

    Shooting on ``q = u'(1)``: the bracket from ``sc`` is doubled until
    ``F(q) = u_q'(0)`` changes sign, then false-position steps (exact after one
    step, as ``F`` is affine in ``q``) with bisection as a safeguard.

    Returns
    -------
    u : ndarray
        Nodal solution.
    q : float
        The root slope at ``y = 1``.
    """
    kappa = np.asarray(kappa, dtype=float)
    forcing = np.asarray(forcing, dtype=float)
    h = 1.0 / (len(kappa) - 1)
    eps = sc.eps_for(h)

    lo, hi = map(float, sc.bracket)
    _, (F_lo, F_hi) = _shoot([lo, hi], kappa, forcing, h, eps)
    for _ in range(sc.max_root_iter):
        if F_lo * F_hi <= 0:
            break
        width = hi - lo
        lo, hi = lo - width, hi + width
        _, (F_lo, F_hi) = _shoot([lo, hi], kappa, forcing, h, eps)
    else:
        raise ConvergenceError("could not bracket the shooting root", residual=min(abs(F_lo), abs(F_hi)))
    scale = max(abs(F_lo), abs(F_hi), 1.0)

    F = F_lo
    for _ in range(sc.max_root_iter):
        if F_hi == F_lo:
            q = 0.5 * (lo + hi)
        else:
            q = hi - F_hi * (hi - lo) / (F_hi - F_lo)
            if not lo <= q <= hi:
                q = 0.5 * (lo + hi)
        u, F = _shoot([q], kappa, forcing, h, eps)
        F = F[0]
        if abs(F) <= sc.root_tol * scale:
            break
        if F * F_lo < 0:
            hi, F_hi = q, F
        else:
            lo, F_lo = q, F
    else:
        raise ConvergenceError(f"shooting root not found (|F| = {abs(F):.3e})", residual=abs(F))
    u = u[:, 0]
    u[-1] = 0.0
    return u, q


def solve_lambda3_bvp(l1_slice, l2_slice, N, C, S, p: Parameters, mc: ModelConstants,
                      sc: ShootingConfig = ShootingConfig(), return_q=False):
    """``l3`` at one time level, given ``l1``, ``l2`` and the state there."""
    kappa, forcing = _lambda3_coefficients(l1_slice, l2_slice, N, C, S, p, mc)
    l3, q = solve_shooting_bvp(kappa, forcing, sc)
    return (l3, q) if return_q else l3


# --- time stepping -----------------------------------------------------------


def _transport_term(lam, w, h):
    """Flux-form upwind approximation of ``(w lam)_y = w lam_y + w_y lam``.

    Face fluxes take ``lam`` from the upwind side of the backward-in-time
    transport; the boundary nodes own half cells.
    """
    wt = trapezoid_weights(len(lam), h)
    wp = np.maximum(w, 0.0) * lam * wt
    wm = np.minimum(w, 0.0) * lam * wt
    out = -wp + wm
    out[:-1] += wp[1:]
    out[1:] -= wm[:-1]
    return out / (wt * h)


def step_lambda1_backward(l1, N, C, V, S, S_prime, l2, l3, N_star, mu1, p, mc, grid: Grid, weight=1.0):
    """Return ``l1`` at ``t - dt`` from the multipliers and state at ``t``.

    Explicit step of::

        -l1_t - w l1_y - (w_y + a - 2 b N) l1 - b S l2 - k S^2 l3 = mu1 (N* - N)

    with ``w = (V - y S')/S``.  ``weight`` scales the data term (1/2 at the
    terminal level, matching trapezoid weights in the misfit).
    """
    h, dt = grid.h, grid.dt
    w = advection_speed(V, S, S_prime)
    courant = np.max(np.abs(w)) * dt / h
    if courant > 1.0:
        raise CFLError(courant)
    r = rates(C, p, mc)
    tendency = (
        _transport_term(l1, w, h)
        + (r.a - 2.0 * r.b * N) * l1
        + r.b * S * l2
        + r.k * S**2 * l3
        + weight * mu1 * (N_star - N)
    )
    return l1 + dt * tendency


def _lambda4_integrand(N, C, V, S, Ny, l1, l2, l3, p, mc):
    # everything in the y-integral of the l4 rate except the time-derivative term
    r = rates(C, p, mc)
    return Ny * V / S**2 * l1 + r.b * N * l2 + 2.0 * r.k * N * S * l3


def step_lambda4_backward(l4, N, C, V, S, Ny, l1, l2, l3, Ny_prev, l1_prev, S_star, mu2, p, mc,
                          grid: Grid, weight=1.0):
    """Return ``(l4(t - dt), l4_t(t))``.

    ``d/dt (N_y l1)`` is a backward difference between ``t`` and ``t - dt``
    (``*_prev`` arguments, the level just produced by the l1 step).
    """
    y = grid.y
    d_t = (Ny * l1 - Ny_prev * l1_prev) / grid.dt
    integrand = _lambda4_integrand(N, C, V, S, Ny, l1, l2, l3, p, mc) - y / S * d_t
    rate = trapezoid(integrand, grid) + weight * mu2 * (S_star - S)
    return l4 - grid.dt * rate, rate


def terminal_slice(traj: StateTrajectory, obs=None, grid: Grid | None = None, cfg=None):
    """Multipliers at ``t = T``: all four vanish identically."""
    n_y = traj.N.shape[1]
    return np.zeros(n_y), np.zeros(n_y), np.zeros(n_y), 0.0


def _density_gradients(traj):
    h = traj.grid.h
    Ny = np.empty_like(traj.N)
    for n in range(traj.N.shape[0]):
        w = advection_speed(traj.V[n], traj.S[n], traj.S_prime[n])
        Ny[n] = upwind_gradient(traj.N[n], w, h)
    return Ny


def solve_adjoint(traj: StateTrajectory, obs: Observations, p: Parameters, mc: ModelConstants = ModelConstants(),
                  sc: ShootingConfig = ShootingConfig(), mu1=None, mu2=None) -> AdjointTrajectory:
    """March the multipliers from ``T`` back to 0.

    ``mu1``/``mu2`` default to the weights carried by ``obs``.
    """
    grid = traj.grid
    mu1 = obs.mu1 if mu1 is None else mu1
    mu2 = obs.mu2 if mu2 is None else mu2
    n_t = grid.n_t
    N, C, V, S, Sp = traj.N, traj.C, traj.V, traj.S, traj.S_prime
    if obs.N_star.shape != N.shape or obs.S_star.shape != S.shape:
        raise ValueError("observations do not match the trajectory grid")
    Ny = _density_gradients(traj)

    l1 = np.zeros_like(N)
    l2 = np.zeros_like(N)
    l3 = np.zeros_like(N)
    l4 = np.zeros(n_t + 1)
    rate4 = np.zeros(n_t + 1)
    q_hat = np.zeros(n_t + 1)
    l1[n_t], l2[n_t], l3[n_t], l4[n_t] = terminal_slice(traj)

    for n in range(n_t, 0, -1):
        wt = 0.5 if n == n_t else 1.0
        l1[n - 1] = step_lambda1_backward(
            l1[n], N[n], C[n], V[n], S[n], Sp[n], l2[n], l3[n], obs.N_star[n], mu1, p, mc, grid, weight=wt
        )
        l4[n - 1], rate4[n] = step_lambda4_backward(
            l4[n], N[n], C[n], V[n], S[n], Ny[n], l1[n], l2[n], l3[n], Ny[n - 1], l1[n - 1],
            obs.S_star[n], mu2, p, mc, grid, weight=wt,
        )
        l2[n - 1] = solve_lambda2_ode(l1[n - 1], Ny[n - 1], S[n - 1], l4[n - 1], sc)
        l3[n - 1], q_hat[n - 1] = solve_lambda3_bvp(
            l1[n - 1], l2[n - 1], N[n - 1], C[n - 1], S[n - 1], p, mc, sc, return_q=True
        )
    adj = AdjointTrajectory(l1=l1, l2=l2, l3=l3, l4=l4, q_hat=q_hat, l4_rate=rate4)
    adj.l5, adj.l6, adj.l7, adj.l8, adj.l9 = auxiliary_multipliers(l1, l2, l3, l4, traj, grid)
    return adj


def auxiliary_multipliers(l1, l2, l3, l4, traj: StateTrajectory, grid: Grid):
    """Multipliers of the boundary and initial rows; not needed by the gradient."""
    h = grid.h
    l5 = l2[:, 0].copy()
    # one-sided second-order slope at y = 1
    l3_y1 = (3 * l3[:, -1] - 4 * l3[:, -2] + l3[:, -3]) / (2 * h)
    l6 = l3_y1 - 2.0 * l3[:, -1]
    l7 = 3.0 * l3[:, 0]
    l8 = l1[0].copy()
    Ny0 = _density_gradients(traj)[0]
    l9 = float(-trapezoid(grid.y * Ny0 * l1[0], grid) / traj.S[0] - l4[0])
    return l5, l6, l7, l8, l9


def lambda4_explicit(traj: StateTrajectory, adj: AdjointTrajectory, obs: Observations, p: Parameters,
                     mc: ModelConstants = ModelConstants(), mu2=None):
    """Closed-form l4 at every time level (verification oracle for the stepped l4).

    Uses ``N_t - N(a - bN)`` in place of the transport terms, a one-sided
    time derivative of ``N`` and trapezoid quadrature in time.
    """
    grid = traj.grid
    mu2 = obs.mu2 if mu2 is None else mu2
    N, C, S = traj.N, traj.C, traj.S
    Nt = np.empty_like(N)
    Nt[:-1] = np.diff(N, axis=0) / grid.dt
    Nt[-1] = Nt[-2]
    r = rates(C, p, mc)
    inner = (Nt - N * (r.a - r.b * N)) * adj.l1 / S[:, None] - r.b * N * adj.l2 - 2.0 * r.k * N * S[:, None] * adj.l3
    g = trapezoid(inner, grid) + mu2 * (S - obs.S_star)
    Ny = _density_gradients(traj)
    boundary = trapezoid(grid.y * Ny * adj.l1, grid) / S
    out = np.empty(grid.n_t + 1)
    for n in range(grid.n_t + 1):
        tail = np.trapezoid(g[n:], dx=grid.dt) if n < grid.n_t else 0.0
        out[n] = tail - boundary[n]
    return out
