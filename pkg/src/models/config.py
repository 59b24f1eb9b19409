"""Run configuration schemas.

Every run file (TOML) and every ``--set`` override is validated through
these models before any solver code sees it. Unknown keys are rejected so
a typo in a run file fails loudly instead of silently using a default.
"""

from __future__ import annotations

import math
from enum import StrEnum
from pathlib import Path
from typing import TYPE_CHECKING, Literal, Self

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.models.domain import ContinuationMode, NormKind

if TYPE_CHECKING:
    from collections.abc import Iterable

STOKES_THRESHOLD = 1e6
IDENTITY_THRESHOLD = 1e-6


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------


class KrylovConfig(_Frozen):
    """BiCGStab stopping rules."""

    rel_tol: float = Field(default=1e-2, gt=0.0, lt=1.0)
    max_iters: int = Field(default=5000, ge=1)
    breakdown_eps: float = Field(default=1e-30, gt=0.0)


class ContinuationConfig(_Frozen):
    """Prediction, correction and step-control settings of a branch trace."""

    mode: ContinuationMode = ContinuationMode.FIXED_PARAMETER
    direction: Literal[1, -1] = 1
    norm: NormKind = NormKind.RMS

    delta_lambda_init: float = Field(default=0.01, ge=0.0)
    delta_lambda_max: float = Field(default=1.0, gt=0.0)
    growth_factor: float = 1.2
    shrink_factor: float = 0.9
    slow_shrink_factor: float | None = Field(
        default=None,
        gt=0.0,
        lt=1.0,
        description="Multiply the step by this factor when Newton needed more than newton_target",
    )
    max_step_attempts: int = Field(default=60, ge=1)

    newton_target: int = Field(default=4, ge=1)
    newton_max: int = Field(default=10, ge=1)
    newton_tol: float = Field(default=1e-8, gt=0.0)

    krylov_tol: float = Field(default=1e-2, gt=0.0, lt=1.0)
    krylov_cap: int = Field(default=5000, ge=1)
    krylov_breakdown_eps: float = Field(default=1e-30, gt=0.0)

    switch_constant: float = Field(default=10.0, gt=0.0)
    component_switching: bool = Field(
        default=True,
        description="Freeze a component on steep slopes; when off, folds are turned by the "
        "lambda sign flip alone",
    )
    fixed_component_index: int | None = Field(
        default=None,
        ge=0,
        description="Freeze this state index near folds instead of the largest-change index",
    )

    delta_s: float = Field(default=0.1, ge=0.0)
    delta_s_max: float | None = Field(default=None, gt=0.0)

    @model_validator(mode="after")
    def _check_step_rules(self) -> Self:
        if not 1.0 < self.growth_factor < 1.4:
            raise ValueError("growth_factor must lie in (1, 1.4)")
        if not 0.0 < self.shrink_factor < 1.0:
            raise ValueError("shrink_factor must lie in (0, 1)")
        if self.delta_lambda_init > self.delta_lambda_max:
            raise ValueError("delta_lambda_init must not exceed delta_lambda_max")
        if self.delta_s_max is not None and self.delta_s > self.delta_s_max:
            raise ValueError("delta_s must not exceed delta_s_max")
        return self

    @property
    def krylov(self) -> KrylovConfig:
        return KrylovConfig(
            rel_tol=self.krylov_tol,
            max_iters=self.krylov_cap,
            breakdown_eps=self.krylov_breakdown_eps,
        )

    @property
    def arclength_cap(self) -> float:
        return self.delta_s_max if self.delta_s_max is not None else self.delta_s


class StopRule(_Frozen):
    """When a branch trace ends."""

    max_points: int = Field(default=100, ge=0)
    parameter_min: float = -math.inf
    parameter_max: float = math.inf

    @model_validator(mode="after")
    def _check_bounds(self) -> Self:
        if self.parameter_min >= self.parameter_max:
            raise ValueError("parameter_min must be below parameter_max")
        return self

    def contains(self, parameter: float) -> bool:
        return self.parameter_min <= parameter <= self.parameter_max


# ---------------------------------------------------------------------------
# Preconditioner
# ---------------------------------------------------------------------------


class PreconditionerBlock(_Frozen):
    """Time step and scaling of c(I - dt L)^-1 for one equation block.

    ``delta_t = "parameter"`` ties the block's step to the continuation
    parameter (dt = Re for the Waleffe mean equations). ``c`` defaults to
    dt; a different constant is only meaningful in the Stokes limit.
    ``diffusivity_scale`` is the kappa of the (1 + kappa dt)/dt metric
    scaling and defaults to the problem's value for the block.
    """

    name: str
    delta_t: float | Literal["parameter"]
    c: float | None = Field(default=None, gt=0.0)
    diffusivity_scale: float | None = Field(default=None, ge=0.0)

    @model_validator(mode="after")
    def _check_scaling(self) -> Self:
        if isinstance(self.delta_t, float) and self.delta_t <= 0.0:
            raise ValueError(f"block {self.name!r}: delta_t must be positive")
        if self.c is None:
            return self
        if self.delta_t == "parameter":
            raise ValueError(f"block {self.name!r}: c cannot be set for a parameter-tied step")
        if self.c != self.delta_t and self.delta_t < STOKES_THRESHOLD:
            raise ValueError(
                f"block {self.name!r}: c differs from delta_t outside the Stokes limit"
            )
        return self


class PreconditionerSpec(_Frozen):
    """Per-block preconditioner settings; every problem block appears once."""

    blocks: tuple[PreconditionerBlock, ...] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _check_unique(self) -> Self:
        names = [block.name for block in self.blocks]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate preconditioner blocks: {names}")
        return self

    @classmethod
    def uniform(cls, names: Iterable[str], delta_t: float) -> PreconditionerSpec:
        return cls(blocks=tuple(PreconditionerBlock(name=n, delta_t=delta_t) for n in names))

    def block(self, name: str) -> PreconditionerBlock:
        for block in self.blocks:
            if block.name == name:
                return block
        raise KeyError(name)

    def with_delta_t(
        self,
        delta_t: float,
        *,
        names: Iterable[str] | None = None,
    ) -> PreconditionerSpec:
        """Copy with ``delta_t`` applied to the named blocks (all when None)."""
        selected = set(names) if names is not None else None
        blocks = tuple(
            block.model_copy(update={"delta_t": delta_t, "c": None})
            if selected is None or block.name in selected
            else block
            for block in self.blocks
        )
        return PreconditionerSpec(blocks=blocks)


class PreconditionerConfig(_Frozen):
    """Run-file form: one step for every block, then per-block overrides."""

    delta_t: float | None = Field(default=None, gt=0.0)
    blocks: tuple[PreconditionerBlock, ...] = ()

    def resolve(self, default: PreconditionerSpec) -> PreconditionerSpec:
        spec = default if self.delta_t is None else default.with_delta_t(self.delta_t)
        overrides = {block.name: block for block in self.blocks}
        unknown = set(overrides) - {block.name for block in spec.blocks}
        if unknown:
            raise ValueError(f"unknown preconditioner blocks: {sorted(unknown)}")
        return PreconditionerSpec(
            blocks=tuple(overrides.get(block.name, block) for block in spec.blocks)
        )


# ---------------------------------------------------------------------------
# Problems
# ---------------------------------------------------------------------------


class ProblemName(StrEnum):
    TOY = "toy"
    DDC2D = "ddc2d"
    WALEFFE = "waleffe"


class ToyKind(StrEnum):
    """Algebraic test problems."""

    FOLD = "fold"  # lambda - u^2
    PARABOLA = "parabola"  # u^2 + lambda - 1
    CIRCLE = "circle"  # u^2 + lambda^2 - 1


class ToyConfig(_Frozen):
    kind: ToyKind = ToyKind.FOLD


class Ddc2dConfig(_Frozen):
    """2D doubly diffusive cavity; x vertical in [0, aspect], z in [0, 1]."""

    nx: int = Field(default=48, ge=4)
    nz: int = Field(default=48, ge=4)
    aspect: float = Field(default=1.0, gt=0.0)
    pr: float = Field(default=1.0, gt=0.0)
    tau: float = Field(default=1.0 / 11.0, gt=0.0)
    ra: float = 2500.0


class WaleffeConfig(_Frozen):
    """Reduced plane-Waleffe model on [-1, 1] x [0, L_z]."""

    n_y: int = Field(default=32, ge=4)
    n_z: int = Field(default=32, ge=4)
    l_z: float = Field(default=math.pi, gt=0.0)
    alpha: float = Field(default=0.5, gt=0.0)
    re: float = Field(default=100.0, gt=0.0)

    @model_validator(mode="after")
    def _check_even(self) -> Self:
        if self.n_z % 2:
            raise ValueError("n_z must be even")
        return self


# ---------------------------------------------------------------------------
# Seeds, sweeps, run file
# ---------------------------------------------------------------------------


class SeedSource(StrEnum):
    BUILTIN = "builtin"  # toy state, DDC conduction, Waleffe laminar
    SNAPSHOT = "snapshot"
    TIME_INTEGRATION = "time_integration"


class SeedConfig(_Frozen):
    source: SeedSource = SeedSource.BUILTIN
    parameter: float | None = Field(
        default=None,
        description="Seed parameter; defaults to the problem's own (ra / re)",
    )
    state: tuple[float, ...] | None = Field(default=None, description="Toy seed state")
    path: Path | None = None

    # Time-integration recipe (DDC only)
    steps: int = Field(default=3000, ge=1)
    dt: float = Field(default=1e-3, gt=0.0)
    amplitude: float = Field(default=1e-2, gt=0.0)
    polish_delta_t: float = Field(default=0.06, gt=0.0)

    @model_validator(mode="after")
    def _check_source(self) -> Self:
        if self.source is SeedSource.SNAPSHOT and self.path is None:
            raise ValueError("snapshot seeds need a path")
        return self


class SweepConfig(_Frozen):
    delta_t_values: tuple[float, ...] = Field(
        default=(1e-4, 1e-3, 1e-2, 0.06, 1.0, 1e2, 1e6),
        min_length=1,
    )
    blocks: tuple[str, ...] | None = Field(
        default=None,
        description="Vary delta_t only for these blocks (all blocks when unset)",
    )
    tail_window: int = Field(default=50, ge=1)


class RunConfig(_Frozen):
    """Everything a ``run`` or ``sweep`` needs, as read from a TOML file."""

    problem: ProblemName = ProblemName.TOY
    toy: ToyConfig = Field(default_factory=ToyConfig)
    ddc2d: Ddc2dConfig = Field(default_factory=Ddc2dConfig)
    waleffe: WaleffeConfig = Field(default_factory=WaleffeConfig)

    continuation: ContinuationConfig = Field(default_factory=ContinuationConfig)
    preconditioner: PreconditionerConfig = Field(default_factory=PreconditionerConfig)
    seed: SeedConfig = Field(default_factory=SeedConfig)
    stop: StopRule = Field(default_factory=StopRule)
    sweep: SweepConfig = Field(default_factory=SweepConfig)

    output_dir: Path | None = None
    snapshot_stride: int = Field(default=0, ge=0, description="0 disables snapshots")
