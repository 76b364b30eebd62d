"""
GPMorph Error Types
===================
Exception hierarchy shared by all packages. Every error carries the exit code
the command line reports for it.
"""

from typing import Optional


class GPMorphError(Exception):
    """Base class for all GPMorph errors."""

    exit_code = 2


# ========================================
# Usage errors (exit code 1)
# ========================================
class UsageError(GPMorphError, ValueError):
    """Bad input: flags, files, parameters."""

    exit_code = 1


class GeometryError(UsageError):
    """Invalid mesh, image or landmark data."""


class FileFormatError(UsageError):
    """A PLY, MetaImage, CSV or manifest file could not be read."""


class KernelError(UsageError):
    """Invalid kernel construction (bad parameters, mismatched datasets)."""


class KernelSyntaxError(KernelError):
    """Kernel DSL error with a source position.

    Args:
        message: What went wrong.
        line: 1-based line of the offending token, if known.
        column: 1-based column of the offending token, if known.
    """

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        if line is not None and column is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


class UnknownIdentifierError(KernelSyntaxError):
    pass


class ArityError(KernelSyntaxError):
    pass


class ParameterError(KernelSyntaxError):
    """Parameter out of range (nonpositive scale, non-PSD matrix, ...)."""


class ObservationError(UsageError):
    """Inconsistent observation or landmark sets."""


class CoefficientError(UsageError):
    """Coefficient vector does not match the model rank."""


# ========================================
# Numerical failures (exit code 2)
# ========================================
class NumericalError(GPMorphError, ArithmeticError):
    """A numerical procedure failed."""

    exit_code = 2


class InsufficientSpectrumError(NumericalError):
    """The available eigenvalues cannot reach the requested variance fraction."""


class InsufficientRankError(NumericalError):
    """No eigenvalue survived the cutoff, or the requested rank is impossible."""


class EigenSolverError(NumericalError):
    """The eigensolver failed to converge or produced non-finite values."""


class CholeskyError(NumericalError):
    """Cholesky factorization failed even after jitter escalation."""


class DivergenceError(NumericalError):
    """Registration energy blew up past the divergence threshold."""
