"""Exception hierarchy shared by all modules.

The CLI maps :class:`InputError` to exit code 2 and every other
:class:`GpSparxError` to exit code 3.
"""


class GpSparxError(Exception):
    """Base class for all package errors."""


class InputError(GpSparxError, ValueError):
    """Invalid argument, malformed file or inconsistent configuration."""


class ConditioningError(GpSparxError, RuntimeError):
    """Cholesky factorisation failed even after jitter escalation."""

    def __init__(self, message, jitter=None):
        super().__init__(message)
        self.jitter = jitter


class FitError(GpSparxError, RuntimeError):
    """Hyperparameter fitting could not produce a usable model."""


class MetricError(GpSparxError, ArithmeticError):
    """A summary metric is undefined for the given records."""


class InvariantError(GpSparxError, AssertionError):
    """An internal invariant (e.g. graph acyclicity) was violated."""
