"""Exceptions raised by marma.

Each class also derives from the built-in exception a caller would catch
anyway, so ``except ValueError`` keeps working.
"""

import numpy as np


class MarmaError(Exception):
    """Base class for all marma errors."""


class DomainError(MarmaError, ValueError):
    """Argument outside the domain of a function."""


class DimensionError(MarmaError, ValueError):
    """Parameter vector or covariates inconsistent with a ModelSpec."""


class NonFiniteError(MarmaError, ArithmeticError):
    """A recursion or likelihood term became non-finite.

    ``index`` is the 1-based time index of the first offending term.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ConvergenceError(MarmaError, RuntimeError):
    """Optimizer failed; ``fit`` holds the best iterate reached."""

    def __init__(self, message, fit=None):
        super().__init__(message)
        self.fit = fit


class SingularInformationError(MarmaError, np.linalg.LinAlgError):
    """Conditional information matrix is not numerically invertible."""


class ValidationError(MarmaError, ValueError):
    """Invalid dataset or configuration.

    ``rows`` lists offending 1-based data rows, when there are any.
    """

    def __init__(self, message, rows=()):
        super().__init__(message)
        self.rows = tuple(rows)


class InsufficientDataError(MarmaError, ValueError):
    """Too few observations, or a constant series."""


class InputFileError(MarmaError, OSError):
    """A data, config or model file could not be parsed.

    ``line`` is the 1-based line of the problem, when known.
    """

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
