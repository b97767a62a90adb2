"""Exception types raised by the solvers."""


class SolverError(RuntimeError):
    """Base class for numerical failures of the forward or adjoint solvers."""


class ConvergenceError(SolverError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CFLError(SolverError):
    def __init__(self, courant):
        super().__init__(f"CFL condition violated: Courant number {courant:.4g} > 1")
        self.courant = courant


class CollapseError(SolverError):
    """The tumour radius became non-positive."""
