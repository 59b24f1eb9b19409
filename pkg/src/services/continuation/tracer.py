"""Branch tracing.

Orchestrates predict -> correct -> adapt until the stop rule fires:

    fixed-parameter mode: lambda steps while the branch slope is gentle,
        frozen-component steps near folds (mode_switch decides each step);
        leaving component mode re-derives the sign of the lambda step from
        the last two points, which is how a fold gets crossed.
    pseudo-arclength mode: one fixed-lambda bootstrap step, then secant
        prediction and bordered correction at fixed arclength.

A lambda step that fails twice in a row while the slope is steep is taken
as having run past a fold: the sign of the lambda step flips and the next
attempt starts from the last point mirrored through the vertex of a
quadratic lambda(u_k) fit, so the corrector lands on the far arm. With
``component_switching`` off this flip is the only way folds are turned.

Each step is retried with a shrinking step size through tenacity while the
corrector raises CorrectionFailure. The retry loop ends in
StepUnderflowError once the step falls below 1e-12 of its initial value or
the attempt budget is spent. Every converged point is handed to the
observer as soon as it exists so callers can flush it to disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import structlog
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt, wait_none

from src.core.exceptions import CorrectionFailure, StepUnderflowError
from src.models.domain import (
    BranchPoint,
    ContinuationMode,
    CorrectionKind,
    FixedComponent,
    FixedLambda,
    PointStatus,
    Prediction,
    PredictorHistory,
)
from src.services.continuation.corrector import (
    branch_norm,
    correct_fixed_component,
    correct_fixed_parameter,
    correct_pseudo_arclength,
)
from src.services.continuation.predictor import (
    approximate_tangent,
    mode_switch,
    monotone_suffix,
    parameter_of,
    predict,
    state_component,
)
from src.services.continuation.step_control import adapt_step, underflowed
from src.services.preconditioning.stepper import StepperPreconditioner

if TYPE_CHECKING:
    from collections.abc import Callable

    from tenacity import RetryCallState

    from src.core.metrics import SolverMetrics
    from src.models.config import ContinuationConfig, PreconditionerSpec, StopRule
    from src.services.problems.base import Problem

logger: structlog.stdlib.BoundLogger = structlog.get_logger()

FLIP_AFTER_FAILURES = 2


@dataclass(frozen=True, slots=True)
class TraceRecord:
    """One row of the branch log."""

    index: int
    point: BranchPoint
    delta_lambda: float
    mode: CorrectionKind
    status: PointStatus


@dataclass(slots=True)
class _StepState:
    """Magnitude, travel direction and limits of the active step variable."""

    size: float
    direction: float
    initial: float
    cap: float


class BranchTracer:
    """Traces one branch of ``problem`` from a seed point."""

    def __init__(
        self,
        problem: Problem,
        spec: PreconditionerSpec,
        config: ContinuationConfig,
        stop: StopRule,
        *,
        observer: Callable[[TraceRecord], None] | None = None,
        metrics: SolverMetrics | None = None,
    ) -> None:
        self._problem = problem
        self._spec = spec
        self._config = config
        self._stop = stop
        self._observer = observer
        self._metrics = metrics
        self._branch: list[BranchPoint] = []
        self._last_attempted: float | None = None
        # Lambda predictions only look at points from here on (reset by a flip).
        self._history_start = 0
        self._reflection: Prediction | None = None

    @property
    def branch(self) -> list[BranchPoint]:
        return list(self._branch)

    # ------------------------------------------------------------------
    # Entry point
    # ------------------------------------------------------------------

    def trace(self, seed: BranchPoint) -> list[BranchPoint]:
        self._problem.parameter = seed.parameter
        metric = StepperPreconditioner(self._problem, self._spec).convergence_metric(seed.state)
        if metric >= self._config.newton_tol:
            logger.warning("seed_not_converged", metric=metric, tol=self._config.newton_tol)

        self._branch = []
        self._history_start = 0
        self._reflection = None
        self._record(seed, CorrectionKind.SEED, PointStatus.SEED)
        if self._stop.max_points == 0:
            return self.branch

        if self._config.mode is ContinuationMode.PSEUDO_ARCLENGTH:
            self._trace_arclength()
        else:
            self._trace_fixed_parameter()
        logger.info(
            "branch_traced",
            points=len(self._branch) - 1,
            parameter=self._branch[-1].parameter,
        )
        return self.branch

    # ------------------------------------------------------------------
    # Fixed-parameter mode with fold handling
    # ------------------------------------------------------------------

    def _trace_fixed_parameter(self) -> None:
        cfg = self._config
        lam_step = _StepState(
            size=cfg.delta_lambda_init,
            direction=float(cfg.direction),
            initial=cfg.delta_lambda_init,
            cap=cfg.delta_lambda_max,
        )
        component_step: _StepState | None = None
        mode: FixedLambda | FixedComponent = FixedLambda()

        while not self._done():
            mode, component_step = self._switch_mode(mode, lam_step, component_step)

            if isinstance(mode, FixedComponent) and component_step is not None:
                k = mode.k
                step = component_step

                def attempt(k: int = k, step: _StepState = step) -> BranchPoint:
                    return self._component_step(k, step)

                point = self._with_retries(attempt, step)
                self._record(point, CorrectionKind.FIXED_COMPONENT, PointStatus.CONVERGED)
                step.size = adapt_step(step.size, point.stats.newton_iterations, cfg, cap=step.cap)
                if not self._stop.contains(point.parameter):
                    break
                continue

            remaining = self._remaining(lam_step.direction)
            if remaining <= 0.0:
                break
            point = self._with_retries(
                lambda: self._lambda_step(lam_step, remaining),
                lam_step,
                on_failure=self._arm_flip,
            )
            flipped = self._reflection is not None
            self._reflection = None
            self._record(point, CorrectionKind.FIXED_LAMBDA, PointStatus.CONVERGED)
            if flipped:
                lam_step.direction = -lam_step.direction
                self._history_start = len(self._branch) - 1
                logger.info(
                    "fold_crossed", parameter=point.parameter, direction=lam_step.direction
                )
            if point.parameter in (self._stop.parameter_min, self._stop.parameter_max):
                break
            lam_step.size = adapt_step(
                lam_step.size, point.stats.newton_iterations, cfg, cap=lam_step.cap
            )

    def _switch_mode(
        self,
        mode: FixedLambda | FixedComponent,
        lam_step: _StepState,
        component_step: _StepState | None,
    ) -> tuple[FixedLambda | FixedComponent, _StepState | None]:
        if not self._config.component_switching or len(self._branch) < 2:
            return mode, component_step
        previous, last = self._branch[-2], self._branch[-1]
        wanted = mode_switch(
            PredictorHistory(points=(previous, last)),
            self._config.switch_constant,
            component_index=self._config.fixed_component_index,
        )

        if isinstance(wanted, FixedComponent):
            if isinstance(mode, FixedComponent) and component_step is not None:
                # Keep the frozen index; follow the component's travel.
                du = float(last.state[mode.k] - previous.state[mode.k])
                if du != 0.0:
                    component_step.direction = math.copysign(1.0, du)
                return mode, component_step
            du = float(last.state[wanted.k] - previous.state[wanted.k])
            if du == 0.0:
                return mode, component_step
            size = abs(du)
            scale = self._config.delta_lambda_max / max(lam_step.size, 1e-300)
            logger.info("mode_switched", mode=CorrectionKind.FIXED_COMPONENT.value, k=wanted.k)
            return wanted, _StepState(
                size=size,
                direction=math.copysign(1.0, du),
                initial=size,
                cap=size * scale,
            )

        if isinstance(mode, FixedComponent):
            dlam = last.parameter - previous.parameter
            if dlam != 0.0:
                new_direction = math.copysign(1.0, dlam)
                if new_direction != lam_step.direction:
                    logger.info("fold_crossed", parameter=last.parameter, direction=new_direction)
                lam_step.direction = new_direction
            logger.info("mode_switched", mode=CorrectionKind.FIXED_LAMBDA.value)
        return FixedLambda(), None

    def _remaining(self, direction: float) -> float:
        """Distance to the parameter bound ahead of the last point."""
        last = self._branch[-1].parameter
        bound = self._stop.parameter_max if direction > 0 else self._stop.parameter_min
        return abs(bound - last) if self._stop.contains(last) else 0.0

    def _lambda_step(self, step: _StepState, remaining: float) -> BranchPoint:
        if self._reflection is not None:
            return self._flipped_step(step, self._reflection)
        delta = step.direction * min(step.size, remaining)
        history = monotone_suffix(self._branch[self._history_start :], parameter_of)
        prediction = predict(history, delta)
        if step.size >= remaining:
            # land on the bound itself, not on last + (bound - last)
            bound = self._stop.parameter_max if step.direction > 0 else self._stop.parameter_min
            prediction = Prediction(state=prediction.state, parameter=bound)
        self._last_attempted = prediction.parameter
        return correct_fixed_parameter(
            self._problem, self._spec, prediction.state, prediction.parameter, self._config
        )

    def _flipped_step(self, step: _StepState, reflection: Prediction) -> BranchPoint:
        """Lambda step in the reversed direction, started on the far arm."""
        direction = -step.direction
        remaining = self._remaining(direction)
        if step.size >= remaining:
            parameter = self._stop.parameter_max if direction > 0 else self._stop.parameter_min
        else:
            parameter = self._branch[-1].parameter + direction * step.size
        self._last_attempted = parameter
        return correct_fixed_parameter(
            self._problem, self._spec, reflection.state, parameter, self._config
        )

    def _arm_flip(self, failures: int) -> None:
        """After repeated failures on a steep slope, aim the next attempt past the fold."""
        if failures < FLIP_AFTER_FAILURES or self._reflection is not None:
            return
        if len(self._branch) - self._history_start < 2:
            return
        previous, last = self._branch[-2], self._branch[-1]
        verdict = mode_switch(
            PredictorHistory(points=(previous, last)),
            self._config.switch_constant,
            component_index=self._config.fixed_component_index,
        )
        if not isinstance(verdict, FixedComponent):
            return
        reflection = self._fold_reflection(verdict.k)
        if reflection is None:
            return
        logger.info(
            "lambda_direction_flipped", parameter=last.parameter, failures=failures, k=verdict.k
        )
        self._reflection = reflection

    def _fold_reflection(self, k: int) -> Prediction | None:
        """Mirror the last point through the vertex of lambda(u_k) fitted to three points.

        None when fewer than three points are monotone in u_k or when the
        fitted vertex is not ahead of the last point.
        """
        history = monotone_suffix(self._branch[self._history_start :], state_component(k))
        if len(history) < 3:
            return None
        s = [float(p.state[k]) for p in history.points]
        lam = [p.parameter for p in history.points]
        d1 = (lam[2] - lam[1]) / (s[2] - s[1])
        d0 = (lam[1] - lam[0]) / (s[1] - s[0])
        d2 = (d1 - d0) / (s[2] - s[0])
        if d2 == 0.0:
            return None
        vertex = 0.5 * (s[1] + s[2]) - d1 / (2.0 * d2)
        if (vertex - s[2]) * (s[2] - s[1]) <= 0.0:
            return None
        return predict(history, 2.0 * (vertex - s[2]), component=k)

    def _component_step(self, k: int, step: _StepState) -> BranchPoint:
        history = monotone_suffix(self._branch, state_component(k))
        prediction = predict(history, step.direction * step.size, component=k)
        self._last_attempted = prediction.parameter
        return correct_fixed_component(
            self._problem, self._spec, prediction.state, prediction.parameter, k, self._config
        )

    # ------------------------------------------------------------------
    # Pseudo-arclength mode
    # ------------------------------------------------------------------

    def _trace_arclength(self) -> None:
        cfg = self._config
        if len(self._branch) == 1:
            bootstrap = _StepState(
                size=cfg.delta_lambda_init,
                direction=float(cfg.direction),
                initial=cfg.delta_lambda_init,
                cap=cfg.delta_lambda_max,
            )
            remaining = self._remaining(bootstrap.direction)
            if remaining <= 0.0:
                return
            point = self._with_retries(lambda: self._lambda_step(bootstrap, remaining), bootstrap)
            self._record(point, CorrectionKind.FIXED_LAMBDA, PointStatus.CONVERGED)

        step = _StepState(
            size=cfg.delta_s,
            direction=1.0,
            initial=cfg.delta_s,
            cap=cfg.arclength_cap,
        )
        while not self._done() and self._stop.contains(self._branch[-1].parameter):
            point = self._with_retries(lambda: self._arclength_step(step), step)
            self._record(point, CorrectionKind.PSEUDO_ARCLENGTH, PointStatus.CONVERGED)
            step.size = adapt_step(step.size, point.stats.newton_iterations, cfg, cap=step.cap)

    def _arclength_step(self, step: _StepState) -> BranchPoint:
        anchor = self._branch[-1]
        tangent = approximate_tangent(
            PredictorHistory(points=(self._branch[-2], anchor)), delta_s=step.size
        )
        guess = anchor.state + step.size * tangent.tangent_state
        parameter = anchor.parameter + step.size * tangent.tangent_parameter
        self._last_attempted = parameter
        return correct_pseudo_arclength(
            self._problem, self._spec, guess, parameter, tangent, anchor, self._config
        )

    # ------------------------------------------------------------------
    # Shared plumbing
    # ------------------------------------------------------------------

    def _done(self) -> bool:
        return len(self._branch) - 1 >= self._stop.max_points

    def _with_retries(
        self,
        attempt: Callable[[], BranchPoint],
        step: _StepState,
        *,
        on_failure: Callable[[int], None] | None = None,
    ) -> BranchPoint:
        def shrink(retry_state: RetryCallState) -> None:
            outcome = retry_state.outcome
            reason = type(outcome.exception()).__name__ if outcome is not None else "unknown"
            logger.info(
                "continuation_step_failed",
                reason=reason,
                step=step.size,
                attempt=retry_state.attempt_number,
                parameter=self._last_attempted,
            )
            if self._metrics is not None:
                self._metrics.record_failure(reason)
            step.size = adapt_step(step.size, None, self._config, cap=step.cap)
            if on_failure is not None:
                on_failure(retry_state.attempt_number)

        def step_underflow(retry_state: RetryCallState) -> bool:
            return underflowed(step.size, step.initial)

        retrying = Retrying(
            retry=retry_if_exception_type(CorrectionFailure),
            stop=stop_after_attempt(self._config.max_step_attempts) | step_underflow,
            wait=wait_none(),
            after=shrink,
            reraise=True,
        )
        try:
            return retrying(attempt)
        except CorrectionFailure as exc:
            logger.warning(
                "step_underflow",
                step=step.size,
                last_parameter=self._last_attempted,
                reason=type(exc).__name__,
            )
            raise StepUnderflowError(
                "continuation step underflow",
                last_parameter=self._last_attempted,
                details={"step": step.size, "reason": exc.message},
            ) from exc

    def _record(self, point: BranchPoint, mode: CorrectionKind, status: PointStatus) -> None:
        previous = self._branch[-1].parameter if self._branch else point.parameter
        self._branch.append(point)
        record = TraceRecord(
            index=len(self._branch) - 1,
            point=point,
            delta_lambda=point.parameter - previous,
            mode=mode,
            status=status,
        )
        if status is PointStatus.CONVERGED:
            logger.info(
                "continuation_point",
                index=record.index,
                parameter=point.parameter,
                norm=point.norm,
                mode=mode.value,
                newton_iterations=point.stats.newton_iterations,
                krylov_iterations=point.stats.krylov_iterations_total,
            )
            if self._metrics is not None:
                self._metrics.record_point(
                    mode=mode.value,
                    newton_iterations=point.stats.newton_iterations,
                    krylov_iterations=point.stats.krylov_iterations_total,
                )
        if self._observer is not None:
            self._observer(record)


def trace_branch(
    problem: Problem,
    spec: PreconditionerSpec,
    seed: BranchPoint,
    config: ContinuationConfig,
    stop: StopRule,
    *,
    observer: Callable[[TraceRecord], None] | None = None,
    metrics: SolverMetrics | None = None,
) -> list[BranchPoint]:
    """Trace a branch from ``seed``; see BranchTracer."""
    tracer = BranchTracer(problem, spec, config, stop, observer=observer, metrics=metrics)
    return tracer.trace(seed)


def make_seed(
    problem: Problem,
    state: np.ndarray,
    parameter: float,
    config: ContinuationConfig,
) -> BranchPoint:
    """Wrap an externally supplied state as a seed point (zero Newton work)."""
    problem.parameter = parameter
    state = np.asarray(state, dtype=np.float64)
    return BranchPoint(
        state=state,
        parameter=float(parameter),
        norm=branch_norm(problem, state, config.norm),
    )
