"""Exception types raised by the package."""

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """A matrix expected to be Hermitian positive definite is not.

    ``index`` is the offending frequency index when the failure happened
    inside a spectral field, otherwise ``None``.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ConvergenceError(ArithmeticError):
    """The constrained fit did not reach its tolerance within the cycle cap."""

    def __init__(self, message, residual=None, index=None):
        super().__init__(message)
        self.residual = residual
        self.index = index
