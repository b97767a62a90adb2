"""Projected gradient descent over a box of admissible parameters."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import SolverError

__all__ = [
    "OptimizerConfig",
    "IterationRecord",
    "OptimizeResult",
    "OptimizationAborted",
    "project",
    "minimize",
    "DEFAULT_BOX",
]

log = logging.getLogger(__name__)

DEFAULT_BOX = ((0.01, 1.0), (0.01, 1.0), (0.0, 2.0))


@dataclass(frozen=True)
class OptimizerConfig:
    alpha: float = 0.1
    box: tuple = DEFAULT_BOX
    tol_J: float = 1e-6
    tol_step: float = 1e-8
    tol_grad: float = 1e-12
    max_iter: int = 300

    def __post_init__(self):
        lo, hi = self.bounds
        if lo.shape != (3,) or np.any(lo >= hi):
            raise ValueError(f"box must give three intervals with lo < hi, got {self.box}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if min(self.tol_J, self.tol_step, self.tol_grad) <= 0:
            raise ValueError("tolerances must be positive")

    @property
    def bounds(self):
        box = np.asarray(self.box, dtype=float)
        return box[:, 0], box[:, 1]


@dataclass(frozen=True)
class IterationRecord:
    k: int
    p: np.ndarray
    J: float
    grad: np.ndarray
    step_norm: float

    @property
    def grad_norm(self):
        return float(np.linalg.norm(self.grad))


@dataclass
class OptimizeResult:
    p: np.ndarray
    J: float
    trace: list[IterationRecord]
    stop_reasons: list[str]
    warnings: list[str] = field(default_factory=list)

    @property
    def n_iter(self):
        return self.trace[-1].k


class OptimizationAborted(SolverError):
    """A solve failed mid-run; ``trace`` holds the iterations completed so far."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


def project(p, box=DEFAULT_BOX):
    """Componentwise clamp of ``p`` onto the box ``[(lo, hi), ...]``."""
    box = np.asarray(box, dtype=float)
    return np.clip(np.asarray(p, dtype=float), box[:, 0], box[:, 1])


def minimize(objective: Callable, p0, ocfg: OptimizerConfig = OptimizerConfig(), callback=None) -> OptimizeResult:
    """Fixed-step projected gradient descent.

    ``objective(p)`` returns ``(J, grad)`` for a parameter array.  Iterates
    ``p_{k+1} = project(p_k - alpha grad_k)`` until ``J < tol_J``,
    ``|grad| < tol_grad``, ``|p_{k+1} - p_k| < tol_step`` or ``max_iter``.
    Every satisfied rule is reported, checked in that order.  The returned
    point is the best iterate seen.
    """
    lo, hi = ocfg.bounds
    p = np.asarray(p0, dtype=float)
    if np.any(p < lo) or np.any(p > hi):
        raise ValueError(f"starting point {p} lies outside the admissible box")

    trace: list[IterationRecord] = []
    warnings: list[str] = []
    rising = 0
    step = float("nan")
    k = 0
    while True:
        try:
            J, g = objective(p)
        except SolverError as exc:
            raise OptimizationAborted(f"solver failed at iterate {k} (p={p}): {exc}", trace) from exc
        g = np.asarray(g, dtype=float)
        rec = IterationRecord(k, p.copy(), float(J), g, step)
        if not np.isfinite(rec.J):
            raise OptimizationAborted(f"non-finite objective at iterate {k}", trace)
        trace.append(rec)
        if callback is not None:
            callback(rec)

        if k > 0 and rec.J > trace[-2].J:
            rising += 1
            if rising == 5:
                msg = f"objective increased for 5 consecutive iterations (k={k}); alpha may be too large"
                log.warning(msg)
                warnings.append(msg)
        else:
            rising = 0

        reasons = []
        if rec.J < ocfg.tol_J:
            reasons.append("tol_J")
        if rec.grad_norm < ocfg.tol_grad:
            reasons.append("tol_grad")
        if k > 0 and step < ocfg.tol_step:
            reasons.append("tol_step")
        if k >= ocfg.max_iter:
            reasons.append("max_iter")
        if reasons:
            break

        p_next = project(p - ocfg.alpha * g, ocfg.box)
        step = float(np.linalg.norm(p_next - p))
        p = p_next
        k += 1

    best = min(trace, key=lambda r: r.J)
    return OptimizeResult(best.p.copy(), best.J, trace, reasons, warnings)
