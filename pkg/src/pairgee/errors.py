"""Exception types shared across the package."""

from __future__ import annotations


class InputError(ValueError):
    """Invalid user-supplied data or options (dimensions, ranges, file contents)."""


class EvaluationError(ArithmeticError):
    """A model quantity could not be evaluated at the current parameters.

    Carries the linear predictor ``eta`` that overflowed and/or the
    offending ``pair`` (i1, i2) when known.
    """

    def __init__(self, message: str, *, pair=None, eta=None):
        super().__init__(message)
        self.pair = pair
        self.eta = eta


class SingularInformation(RuntimeError):
    """The scoring matrix is numerically singular (condition number too large)."""

    def __init__(self, message: str, *, cond: float | None = None):
        super().__init__(message)
        self.cond = cond


class NonConvergence(RuntimeError):
    """Iteration budget exhausted before the tolerances were met.

    ``result`` holds the last iterate packaged as a FitResult when the
    solver got far enough to build one; ``trace`` holds nuisance iterates
    for the adaptive loop.
    """

    def __init__(self, message: str, *, result=None, eq_norm=None, trace=None):
        super().__init__(message)
        self.result = result
        self.eq_norm = eq_norm
        self.trace = trace
