"""Custom exception hierarchy for the continuation toolkit.

Every solver-layer error inherits from ContinuationError, giving the CLI a
single base class to catch and report. CorrectionFailure groups the errors
that the step-control layer answers by shrinking the continuation step;
everything else is fatal for the current run.
"""

from __future__ import annotations

from typing import Any


class ContinuationError(Exception):
    """Base exception for all continuation errors."""

    def __init__(
        self,
        message: str,
        *,
        details: dict[str, Any] | None = None,
    ) -> None:
        self.message = message
        self.details: dict[str, Any] = details or {}
        super().__init__(message)


class ConfigurationError(ContinuationError):
    """Raised when a run configuration or override is invalid."""


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------


class HistoryError(ContinuationError):
    """Raised when the branch history cannot support a prediction."""


class NoSeedError(HistoryError):
    """Raised when a prediction is requested from an empty history."""


class DegenerateHistoryError(HistoryError):
    """Raised when two history points share the interpolation parameter."""


class StationaryHistoryError(HistoryError):
    """Raised when the extrapolation direction vanishes."""


# ---------------------------------------------------------------------------
# Correction
# ---------------------------------------------------------------------------


class CorrectionFailure(ContinuationError):
    """Raised when a corrector fails; the step controller retries smaller."""


class NonConvergenceError(CorrectionFailure):
    """Raised when Newton exceeds its iteration budget or diverges."""


class KrylovFailure(CorrectionFailure):
    """Raised when the Krylov solver cannot deliver a Newton update."""

    def __init__(
        self,
        message: str,
        *,
        iterations: int = 0,
        details: dict[str, Any] | None = None,
    ) -> None:
        super().__init__(message, details=details)
        self.iterations = iterations


class MaxItersExceededError(KrylovFailure):
    """Raised when BiCGStab reaches its iteration cap."""


class BreakdownError(KrylovFailure):
    """Raised when a BiCGStab scalar (rho or omega) collapses."""


class SingularBorderError(CorrectionFailure):
    """Raised when the parameter-derivative column of a bordered system is null."""


class StepUnderflowError(ContinuationError):
    """Raised when the continuation step cannot be made small enough to succeed."""

    def __init__(
        self,
        message: str,
        *,
        last_parameter: float | None = None,
        details: dict[str, Any] | None = None,
    ) -> None:
        super().__init__(message, details=details)
        self.last_parameter = last_parameter


# ---------------------------------------------------------------------------
# Discretization and I/O
# ---------------------------------------------------------------------------


class CompatibilityError(ContinuationError):
    """Raised when a singular Poisson solve receives a non-zero-mean source."""


class SnapshotError(ContinuationError):
    """Raised when a snapshot file cannot be parsed."""
