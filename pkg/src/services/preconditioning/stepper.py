"""Time-stepper preconditioning.

One implicit-Euler step of du/dt = N(u) + L u, taken block-wise with the
block's own dt,

    u+ = (I - dt L)^-1 (u + dt N(u)),

satisfies u+ - u = dt (I - dt L)^-1 F(u). Stepping then subtracting the
initial condition therefore yields the preconditioned residual c P^-1 F
with P = I - dt L and c = dt, and the linearized step yields the
preconditioned Jacobian action with the same P. Small dt gives the
unpreconditioned system (scaled by dt); large dt gives the Stokes
preconditioner -L^-1.

An explicit ``c`` (Stokes limit only) rescales a block by c/dt.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import structlog

from src.core.exceptions import ConfigurationError
from src.models.config import IDENTITY_THRESHOLD, STOKES_THRESHOLD
from src.models.domain import LimitMode

if TYPE_CHECKING:
    from collections.abc import Callable

    from src.models.config import PreconditionerSpec
    from src.models.domain import FloatArray
    from src.services.problems.base import Problem

logger: structlog.stdlib.BoundLogger = structlog.get_logger()

PARAMETER_STEP = 1e-7


def block_steps(problem: Problem, spec: PreconditionerSpec) -> dict[str, float]:
    """Resolve each block's dt, substituting the parameter where requested."""
    names = {block.name for block in spec.blocks}
    expected = set(problem.layout.block_names)
    if names != expected:
        raise ConfigurationError(
            "preconditioner blocks do not match the problem",
            details={"spec": sorted(names), "problem": sorted(expected)},
        )
    return {
        block.name: problem.parameter if block.delta_t == "parameter" else float(block.delta_t)
        for block in spec.blocks
    }


def limit_mode(
    spec: PreconditionerSpec,
    problem: Problem | None = None,
) -> dict[str, LimitMode]:
    """Classify every block as identity-like, mixed or Stokes.

    Reporting only: the arithmetic always uses the finite-dt formula.
    """
    modes: dict[str, LimitMode] = {}
    for block in spec.blocks:
        if block.delta_t == "parameter":
            if problem is None:
                raise ConfigurationError(
                    f"block {block.name!r} ties dt to the parameter; a problem is needed"
                )
            dt = problem.parameter
        else:
            dt = block.delta_t
        if dt < IDENTITY_THRESHOLD:
            modes[block.name] = LimitMode.IDENTITY
        elif dt > STOKES_THRESHOLD:
            modes[block.name] = LimitMode.STOKES
        else:
            modes[block.name] = LimitMode.MIXED
    return modes


class StepperPreconditioner:
    """Residual, Jacobian and metric actions of one (problem, spec) pair.

    Block steps are re-resolved on every call because a block may follow
    the continuation parameter.
    """

    def __init__(self, problem: Problem, spec: PreconditionerSpec) -> None:
        self.problem = problem
        self.spec = spec
        block_steps(problem, spec)

    # -- block scalings --

    def steps(self) -> dict[str, float]:
        return block_steps(self.problem, self.spec)

    def _c_over_dt(self, steps: dict[str, float]) -> FloatArray:
        ratios = {}
        for block in self.spec.blocks:
            dt = steps[block.name]
            ratios[block.name] = 1.0 if block.c is None else block.c / dt
        return self.problem.layout.broadcast(ratios)

    def _metric_weights(self, steps: dict[str, float]) -> FloatArray:
        weights = {}
        for block in self.spec.blocks:
            dt = steps[block.name]
            kappa = (
                block.diffusivity_scale
                if block.diffusivity_scale is not None
                else self.problem.metric_diffusivity(block.name)
            )
            weights[block.name] = (1.0 + kappa * dt) / dt
        return self.problem.layout.broadcast(weights)

    # -- steppers --

    def advance(self, state: FloatArray, steps: dict[str, float] | None = None) -> FloatArray:
        """One nonlinear implicit-Euler step, at fixed block steps when given."""
        steps = self.steps() if steps is None else steps
        dt = self.problem.layout.broadcast(steps)
        return self.problem.solve_shifted(steps, state + dt * self.problem.eval_N(state, steps))

    def advance_linearized(self, base: FloatArray, direction: FloatArray) -> FloatArray:
        """One step of the equations linearized about ``base``."""
        return self.linearized_stepper(base)(direction)

    def linearized_stepper(self, base: FloatArray) -> Callable[[FloatArray], FloatArray]:
        steps = self.steps()
        dt = self.problem.layout.broadcast(steps)
        dN = self.problem.linearization(base, steps)

        def apply(direction: FloatArray) -> FloatArray:
            return self.problem.solve_shifted(steps, direction + dt * dN(direction))

        return apply

    # -- preconditioned actions --

    def residual_action(
        self,
        state: FloatArray,
        steps: dict[str, float] | None = None,
    ) -> FloatArray:
        """c P^-1 F(u), computed as (step - state) scaled by c/dt."""
        steps = self.steps() if steps is None else steps
        return self._c_over_dt(steps) * (self.advance(state, steps) - state)

    def jacobian_operator(self, base: FloatArray) -> Callable[[FloatArray], FloatArray]:
        """v -> c P^-1 J(base) v, reusing base-state work across calls."""
        scale = self._c_over_dt(self.steps())
        step = self.linearized_stepper(base)

        def apply(direction: FloatArray) -> FloatArray:
            return scale * (step(direction) - direction)

        return apply

    def jacobian_action(self, base: FloatArray, direction: FloatArray) -> FloatArray:
        return self.jacobian_operator(base)(direction)

    def metric_of(self, residual: FloatArray) -> float:
        """Metric of an already computed residual action."""
        steps = self.steps()
        weights = self._metric_weights(steps) / self._c_over_dt(steps)
        return float(np.linalg.norm(weights * residual))

    def convergence_metric(self, state: FloatArray) -> float:
        """L2 norm of (step - state) scaled block-wise by (1 + kappa dt)/dt."""
        return self.metric_of(self.residual_action(state))

    def parameter_derivative(
        self,
        state: FloatArray,
        residual: FloatArray | None = None,
    ) -> FloatArray:
        """Forward difference of the residual action in the parameter.

        Block steps stay at their base values, so a step tied to the
        parameter does not put the preconditioner's own derivative into
        the column.
        """
        base_parameter = self.problem.parameter
        steps = self.steps()
        if residual is None:
            residual = self.residual_action(state, steps)
        h = PARAMETER_STEP * max(1.0, abs(base_parameter))
        self.problem.parameter = base_parameter + h
        try:
            shifted = self.residual_action(state, steps)
        finally:
            self.problem.parameter = base_parameter
        return (shifted - residual) / h


# ---------------------------------------------------------------------------
# Functional forms
# ---------------------------------------------------------------------------


def residual_action(problem: Problem, spec: PreconditionerSpec, state: FloatArray) -> FloatArray:
    return StepperPreconditioner(problem, spec).residual_action(state)


def jacobian_action(
    problem: Problem,
    spec: PreconditionerSpec,
    base_state: FloatArray,
    direction: FloatArray,
) -> FloatArray:
    return StepperPreconditioner(problem, spec).jacobian_action(base_state, direction)


def convergence_metric(problem: Problem, spec: PreconditionerSpec, state: FloatArray) -> float:
    return StepperPreconditioner(problem, spec).convergence_metric(state)
