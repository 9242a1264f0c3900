"""
Dose Finding Errors
===================

Exception types raised by the dose finding library. The CLI maps each
family to an exit code (see dose_finding.cli).
"""

from typing import List, Optional


class DoseFindingError(Exception):
    """Base class for every error raised by this package."""


class InputShapeError(DoseFindingError, ValueError):
    """Array dimensions do not agree."""


class DomainError(DoseFindingError, ValueError):
    """A value lies outside its admissible domain (non-finite, out of range)."""


class DataFormatError(DoseFindingError, ValueError):
    """A CSV or model file could not be parsed."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        if row is not None and column is not None:
            message = f"row {row}, column {column}: {message}"
        elif row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row
        self.column = column


class ConfigValidationError(DoseFindingError, ValueError):
    """One or more configuration values are invalid. All problems are listed."""

    def __init__(self, problems: List[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.problems))


class ConditioningError(DoseFindingError, ArithmeticError):
    """Cholesky factorization failed even at the largest jitter."""

    def __init__(self, message: str, jitter: float):
        super().__init__(f"{message} (last jitter tried: {jitter:.1e})")
        self.jitter = jitter


class FittingError(DoseFindingError, RuntimeError):
    """Every hyperparameter restart failed."""

    def __init__(self, message: str, diagnostics: List[str]):
        details = "\n  ".join(diagnostics)
        super().__init__(f"{message}\n  {details}" if diagnostics else message)
        self.diagnostics = list(diagnostics)
