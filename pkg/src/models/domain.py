"""Core domain types and enumerations.

These are the canonical data shapes passed between the continuation
engine, the preconditioner and the physics problems. Value objects that
carry numpy arrays are frozen dataclasses (arrays are not pydantic-native);
their array payloads are treated as read-only once a point is recorded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import StrEnum
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray

FloatArray = NDArray[np.float64]

# ---------------------------------------------------------------------------
# Enumerations
# ---------------------------------------------------------------------------


class ContinuationMode(StrEnum):
    """How the tracer parameterizes the branch."""

    FIXED_PARAMETER = "fixed_parameter"
    PSEUDO_ARCLENGTH = "pseudo_arclength"


class CorrectionKind(StrEnum):
    """Which corrector produced a branch point."""

    SEED = "seed"
    FIXED_LAMBDA = "fixed_lambda"
    FIXED_COMPONENT = "fixed_component"
    PSEUDO_ARCLENGTH = "pseudo_arclength"


class LimitMode(StrEnum):
    """Regime of the time-stepper preconditioner c(I - dt L)^-1."""

    IDENTITY = "identity"
    MIXED = "mixed"
    STOKES = "stokes"


class NormKind(StrEnum):
    """Scalar functional used as the branch norm."""

    RMS = "rms"
    DIAGNOSTIC = "diagnostic"


class PointStatus(StrEnum):
    SEED = "seed"
    CONVERGED = "converged"


class SweepStatus(StrEnum):
    CONVERGED = "converged"
    FAILED = "failed"


class Parity(StrEnum):
    """Wall-normal expansion of a spectral field."""

    COSINE = "cosine"  # Neumann at y = +-1
    SINE = "sine"  # Dirichlet at y = +-1


class Representation(StrEnum):
    PHYSICAL = "physical"
    SPECTRAL = "spectral"


# ---------------------------------------------------------------------------
# Branch data
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class SolverStats:
    """Newton and Krylov effort spent on one branch point.

    ``per_newton`` holds the Krylov iteration count of every Newton
    correction; their sum is the point's eta.
    """

    newton_iterations: int = 0
    per_newton: tuple[int, ...] = ()

    @property
    def krylov_iterations_total(self) -> int:
        return sum(self.per_newton)


@dataclass(frozen=True, slots=True)
class BranchPoint:
    """A converged (or externally supplied) point of a solution branch."""

    state: FloatArray
    parameter: float
    norm: float
    stats: SolverStats = field(default_factory=SolverStats)


@dataclass(frozen=True, slots=True)
class PredictorHistory:
    """The most recent branch points, oldest first (at most three)."""

    points: tuple[BranchPoint, ...]

    def __post_init__(self) -> None:
        if len(self.points) > 3:
            raise ValueError("predictor history holds at most 3 points")

    @classmethod
    def from_branch(cls, branch: list[BranchPoint]) -> PredictorHistory:
        return cls(points=tuple(branch[-3:]))

    def __len__(self) -> int:
        return len(self.points)

    @property
    def last(self) -> BranchPoint:
        return self.points[-1]


class Prediction(NamedTuple):
    """Predicted state and parameter of the next branch point."""

    state: FloatArray
    parameter: float


# ---------------------------------------------------------------------------
# Correction modes
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class FixedLambda:
    kind: CorrectionKind = CorrectionKind.FIXED_LAMBDA


@dataclass(frozen=True, slots=True)
class FixedComponent:
    k: int
    kind: CorrectionKind = CorrectionKind.FIXED_COMPONENT


@dataclass(frozen=True, slots=True)
class PseudoArclength:
    """Unit tangent (state part, parameter part) and arclength step."""

    tangent_state: FloatArray
    tangent_parameter: float
    delta_s: float
    kind: CorrectionKind = CorrectionKind.PSEUDO_ARCLENGTH

    def __post_init__(self) -> None:
        length = float(np.sqrt(self.tangent_state @ self.tangent_state + self.tangent_parameter**2))
        if not np.isclose(length, 1.0, rtol=1e-10, atol=0.0):
            raise ValueError(f"tangent must have unit norm, got {length}")


CorrectionMode = FixedLambda | FixedComponent | PseudoArclength


# ---------------------------------------------------------------------------
# Spectral fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Field2D:
    """A (y, z) field tagged with its representation and y-parity."""

    values: NDArray[np.complex128] | FloatArray
    representation: Representation
    parity: Parity
