"""Continuation step adaptation.

Fast convergence (at most ``newton_target`` Newton iterations) grows the
step by ``growth_factor`` up to the cap; slower convergence keeps it (or
shrinks it by ``slow_shrink_factor`` when configured); a failed correction
shrinks it by ``shrink_factor`` before the retry.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from src.models.config import ContinuationConfig

UNDERFLOW_RATIO = 1e-12


def adapt_step(
    current_step: float,
    converged_in: int | None,
    config: ContinuationConfig,
    *,
    cap: float | None = None,
) -> float:
    """Next step size; ``converged_in=None`` means the correction failed.

    ``cap`` defaults to ``delta_lambda_max``.
    """
    if current_step < 0.0:
        raise ValueError("step sizes are magnitudes")
    limit = config.delta_lambda_max if cap is None else cap
    if converged_in is None:
        return current_step * config.shrink_factor
    if converged_in <= config.newton_target:
        return min(current_step * config.growth_factor, limit)
    if config.slow_shrink_factor is not None:
        return current_step * config.slow_shrink_factor
    return current_step


def underflowed(step: float, initial_step: float) -> bool:
    return step < UNDERFLOW_RATIO * initial_step
