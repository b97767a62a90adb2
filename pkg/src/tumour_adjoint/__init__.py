"""Adjoint-based parameter estimation for a radially symmetric avascular tumour model."""

from .adjoint import AdjointTrajectory, ShootingConfig, solve_adjoint
from .errors import CFLError, CollapseError, ConvergenceError, SolverError
from .forward import InitialCondition, SolverConfig, StateTrajectory, grow_from_seed, solve_forward
from .grid import Grid
from .io import NoiseSpec, RunConfig, generate_observations, load_config
from .kinetics import ModelConstants, Parameters
from .objective import Observations, eval_J, reduced_objective, sweep_objective
from .optimizer import OptimizerConfig, minimize, project
from .verify import fd_gradient, grad_check, residual_audit

__all__ = [
    "AdjointTrajectory",
    "ShootingConfig",
    "solve_adjoint",
    "CFLError",
    "CollapseError",
    "ConvergenceError",
    "SolverError",
    "InitialCondition",
    "SolverConfig",
    "StateTrajectory",
    "grow_from_seed",
    "solve_forward",
    "Grid",
    "NoiseSpec",
    "RunConfig",
    "generate_observations",
    "load_config",
    "ModelConstants",
    "Parameters",
    "Observations",
    "eval_J",
    "reduced_objective",
    "sweep_objective",
    "OptimizerConfig",
    "minimize",
    "project",
    "fd_gradient",
    "grad_check",
    "residual_audit",
]

__version__ = "0.1.0"
