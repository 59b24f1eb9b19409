"""Branch prediction.

Polynomial extrapolation through the last one, two or three converged
points (constant, linear, quadratic), written in Newton divided-difference
form. The interpolation variable is the continuation parameter, or a
frozen state component while a fixed-component correction is active; in
the latter case the parameter itself is extrapolated like any other
unknown.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from src.core.exceptions import DegenerateHistoryError, NoSeedError, StationaryHistoryError
from src.models.domain import (
    FixedComponent,
    FixedLambda,
    Prediction,
    PredictorHistory,
    PseudoArclength,
)

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from src.models.domain import BranchPoint


def _abscissa(point: BranchPoint, component: int | None) -> float:
    return point.parameter if component is None else float(point.state[component])


def predict(
    history: PredictorHistory,
    delta: float,
    *,
    component: int | None = None,
) -> Prediction:
    """Extrapolate to ``s_last + delta``.

    ``s`` is the parameter, or ``state[component]`` when a component is
    given. The order of the extrapolation is ``len(history) - 1``.
    """
    points = history.points
    if not points:
        raise NoSeedError("no seed")

    s = [_abscissa(p, component) for p in points]
    if len(set(s)) != len(s):
        raise DegenerateHistoryError("degenerate history", details={"abscissae": s})

    # Unknowns carried along: the full state plus the parameter.
    values = [np.append(p.state, p.parameter) for p in points]
    target = s[-1] + delta

    predicted = values[-1].copy()
    if len(points) >= 2:
        d1 = (values[-1] - values[-2]) / (s[-1] - s[-2])
        predicted += d1 * delta
    if len(points) == 3:
        d0 = (values[-2] - values[-3]) / (s[-2] - s[-3])
        d2 = (d1 - d0) / (s[-1] - s[-3])
        predicted += d2 * delta * (target - s[-2])

    state, parameter = predicted[:-1], float(predicted[-1])
    if component is None:
        parameter = target
    else:
        state[component] = target
    return Prediction(state=state, parameter=parameter)


def approximate_tangent(history: PredictorHistory, delta_s: float = 0.0) -> PseudoArclength:
    """Normalized secant through the last two points, oriented along travel."""
    if len(history) < 2:
        raise NoSeedError("tangent needs two points", details={"points": len(history)})
    previous, last = history.points[-2], history.points[-1]
    du = last.state - previous.state
    dlam = last.parameter - previous.parameter
    length = float(np.sqrt(du @ du + dlam**2))
    if length == 0.0:
        raise StationaryHistoryError("stationary history")
    return PseudoArclength(
        tangent_state=du / length,
        tangent_parameter=dlam / length,
        delta_s=delta_s,
    )


def predict_arclength(history: PredictorHistory, delta_s: float) -> Prediction:
    """Step ``delta_s`` along the secant direction from the last point."""
    tangent = approximate_tangent(history, delta_s)
    last = history.last
    return Prediction(
        state=last.state + delta_s * tangent.tangent_state,
        parameter=last.parameter + delta_s * tangent.tangent_parameter,
    )


def mode_switch(
    history: PredictorHistory,
    switch_constant: float,
    *,
    component_index: int | None = None,
) -> FixedLambda | FixedComponent:
    """Fixed-lambda while |dN/dlambda| < c, otherwise freeze one component.

    The frozen index is ``component_index`` when given, else the index of
    largest change between the last two points.
    """
    if len(history) < 2:
        return FixedLambda()
    previous, last = history.points[-2], history.points[-1]
    dlam = last.parameter - previous.parameter
    slope = np.inf if dlam == 0.0 else (last.norm - previous.norm) / dlam
    if abs(slope) < switch_constant:
        return FixedLambda()
    if component_index is not None:
        return FixedComponent(k=component_index)
    return FixedComponent(k=int(np.argmax(np.abs(last.state - previous.state))))


def monotone_suffix(
    points: Sequence[BranchPoint],
    key: Callable[[BranchPoint], float],
    max_len: int = 3,
) -> PredictorHistory:
    """Longest recent run (up to ``max_len``) strictly monotone in ``key``.

    Extrapolating across a fold would mix the two sides of the branch; this
    keeps only points on the current side.
    """
    if not points:
        return PredictorHistory(points=())
    chosen = [points[-1]]
    sign = 0.0
    for point in reversed(points[:-1]):
        if len(chosen) == max_len:
            break
        step = key(chosen[0]) - key(point)
        if step == 0.0 or (sign != 0.0 and np.sign(step) != sign):
            break
        sign = float(np.sign(step))
        chosen.insert(0, point)
    return PredictorHistory(points=tuple(chosen))


def state_component(k: int) -> Callable[[BranchPoint], float]:
    return lambda point: float(point.state[k])


def parameter_of(point: BranchPoint) -> float:
    return point.parameter
