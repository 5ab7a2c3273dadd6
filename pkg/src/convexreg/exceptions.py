"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class SolveError(RuntimeError):
    """A solver finished without a usable solution."""


class LpSolveError(SolveError):
    """The LP backend reported a failure (not merely infeasible/unbounded)."""


class QpConvergenceError(SolveError):
    """The QP solver hit its iteration budget before reaching tolerance.

    Carries the best iterate found so the caller can inspect or salvage it.
    """

    def __init__(self, message, best_model=None, residuals=None):
        super().__init__(message)
        self.best_model = best_model
        self.residuals = residuals


class FitError(SolveError):
    """A regression fit could not be completed."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
