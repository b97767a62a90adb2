"""Uniform space-time grid on the fixed domain [0, 1] x [0, T] and quadrature."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Grid", "trapezoid", "time_trapezoid", "trapezoid_weights"]


@dataclass(frozen=True)
class Grid:
    """``n_y`` equidistant nodes on [0, 1] (endpoints included), ``n_t`` steps of ``dt``."""

    n_y: int = 30
    dt: float = 0.01
    n_t: int = 50

    def __post_init__(self):
        if int(self.n_y) != self.n_y or self.n_y < 3:
            raise ValueError(f"n_y must be an integer >= 3, got {self.n_y}")
        if int(self.n_t) != self.n_t or self.n_t < 1:
            raise ValueError(f"n_t must be a positive integer, got {self.n_t}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n_y - 1)

    @property
    def T(self) -> float:
        return self.n_t * self.dt

    @property
    def y(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_y)

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(self.n_t + 1)


def trapezoid_weights(n: int, dx: float) -> np.ndarray:
    """Composite trapezoid weights for ``n`` equispaced samples."""
    w = np.full(n, dx)
    w[0] = w[-1] = 0.5 * dx
    return w


def trapezoid(f, grid: Grid) -> float | np.ndarray:
    """Approximate the integral over [0, 1] of a field sampled on the spatial nodes.

    ``f`` may carry leading axes (e.g. time levels); the last axis is space.
    """
    f = np.asarray(f, dtype=float)
    if f.shape[-1] != grid.n_y:
        raise ValueError(f"expected {grid.n_y} spatial samples, got {f.shape[-1]}")
    return np.trapezoid(f, dx=grid.h, axis=-1)


def time_trapezoid(g, grid: Grid) -> float | np.ndarray:
    """Approximate the integral over [0, T] of a series sampled at the time levels."""
    g = np.asarray(g, dtype=float)
    if g.shape[0] != grid.n_t + 1:
        raise ValueError(f"expected {grid.n_t + 1} time samples, got {g.shape[0]}")
    return np.trapezoid(g, dx=grid.dt, axis=0)
