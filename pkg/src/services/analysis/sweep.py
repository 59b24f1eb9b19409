"""Preconditioner time-step sweeps.

Each entry traces the configured branch segment (or single step) from the
same seed with one preconditioner dt, and reports the Krylov effort per
point (eta) over the tail of the segment. A failed trace is a result, not
an error: it becomes a ``failed`` row.

The summary locates the cheapest dt, the contiguous range of dt around it
that converged, and the range where mean eta stays below twice its
optimum (edges interpolated in log dt).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from typing import TYPE_CHECKING

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field

from src.core.exceptions import ContinuationError
from src.models.domain import PointStatus, SweepStatus
from src.services.continuation.tracer import trace_branch
from src.services.problems.factory import build_problem, resolve_preconditioner

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from src.models.config import RunConfig
    from src.models.domain import BranchPoint
    from src.services.continuation.tracer import TraceRecord

logger: structlog.stdlib.BoundLogger = structlog.get_logger()

EFFICIENCY_FACTOR = 2.0


class SweepEntry(BaseModel):
    """Outcome of one preconditioner time step."""

    model_config = ConfigDict(frozen=True)

    delta_t: float
    status: SweepStatus
    points_completed: int = Field(..., ge=0)
    eta: tuple[int, ...] = ()
    eta_mean: float = math.nan
    eta_std: float = math.nan
    eta_min: float = math.nan
    eta_max: float = math.nan
    eta_total: int = 0
    error: str | None = None


class SweepSummary(BaseModel):
    """Where the preconditioner works and where it works well."""

    model_config = ConfigDict(frozen=True)

    optimal_delta_t: float | None = None
    optimal_eta_mean: float | None = None
    working_interval: tuple[float, float] | None = None
    efficiency_interval: tuple[float, float] | None = None
    entries: tuple[SweepEntry, ...] = ()


def summarize_eta(
    delta_t: float,
    status: SweepStatus,
    eta: Sequence[int],
    tail_window: int,
    error: str | None = None,
) -> SweepEntry:
    """Statistics of eta over the last ``tail_window`` points."""
    tail = np.asarray(eta[-tail_window:], dtype=np.float64)
    if tail.size == 0:
        return SweepEntry(
            delta_t=delta_t,
            status=status,
            points_completed=len(eta),
            eta=tuple(eta),
            error=error,
        )
    return SweepEntry(
        delta_t=delta_t,
        status=status,
        points_completed=len(eta),
        eta=tuple(eta),
        eta_mean=float(tail.mean()),
        eta_std=float(tail.std()),
        eta_min=float(tail.min()),
        eta_max=float(tail.max()),
        eta_total=int(tail.sum()),
        error=error,
    )


def run_sweep_entry(config: RunConfig, seed: BranchPoint, delta_t: float) -> SweepEntry:
    """Trace the configured segment with every selected block at ``delta_t``."""
    structlog.contextvars.bind_contextvars(delta_t=delta_t)
    problem = build_problem(config)
    spec = resolve_preconditioner(problem, config).with_delta_t(
        delta_t, names=config.sweep.blocks
    )

    eta: list[int] = []

    def collect(record: TraceRecord) -> None:
        if record.status is PointStatus.CONVERGED:
            eta.append(record.point.stats.krylov_iterations_total)

    status, error = SweepStatus.CONVERGED, None
    try:
        trace_branch(problem, spec, seed, config.continuation, config.stop, observer=collect)
    except ContinuationError as exc:
        status, error = SweepStatus.FAILED, exc.message
        logger.info("sweep_entry_failed", delta_t=delta_t, error=exc.message, points=len(eta))

    entry = summarize_eta(delta_t, status, eta, config.sweep.tail_window, error)
    logger.info(
        "sweep_entry_finished",
        delta_t=delta_t,
        status=entry.status.value,
        points=entry.points_completed,
        eta_mean=entry.eta_mean,
    )
    return entry


def run_sweep(
    config: RunConfig,
    seed: BranchPoint,
    *,
    workers: int = 1,
    on_entry: Callable[[SweepEntry], None] | None = None,
) -> SweepSummary:
    """Run every configured dt, in parallel processes when ``workers > 1``.

    ``on_entry`` sees the entries in the configured dt order.
    """
    values = list(config.sweep.delta_t_values)
    entries: list[SweepEntry] = []
    if workers > 1 and len(values) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(values))) as pool:
            count = len(values)
            results = pool.map(run_sweep_entry, [config] * count, [seed] * count, values)
            for entry in results:
                entries.append(entry)
                if on_entry is not None:
                    on_entry(entry)
    else:
        for delta_t in values:
            entry = run_sweep_entry(config, seed, delta_t)
            entries.append(entry)
            if on_entry is not None:
                on_entry(entry)
    return summarize_sweep(entries)


# ---------------------------------------------------------------------------
# Summary
# ---------------------------------------------------------------------------


def _usable(entry: SweepEntry) -> bool:
    return entry.status is SweepStatus.CONVERGED and math.isfinite(entry.eta_mean)


def _crossing(inside: SweepEntry, outside: SweepEntry, level: float) -> float:
    """dt where eta_mean reaches ``level`` between two entries, linear in log dt."""
    a, b = math.log10(inside.delta_t), math.log10(outside.delta_t)
    span = outside.eta_mean - inside.eta_mean
    fraction = (level - inside.eta_mean) / span if span != 0.0 else 0.0
    return float(10.0 ** (a + fraction * (b - a)))


def summarize_sweep(entries: Sequence[SweepEntry]) -> SweepSummary:
    ordered = sorted(entries, key=lambda e: e.delta_t)
    usable = [i for i, e in enumerate(ordered) if _usable(e)]
    if not usable:
        return SweepSummary(entries=tuple(ordered))

    best = min(usable, key=lambda i: ordered[i].eta_mean)
    lo = best
    while lo > 0 and _usable(ordered[lo - 1]):
        lo -= 1
    hi = best
    while hi < len(ordered) - 1 and _usable(ordered[hi + 1]):
        hi += 1

    level = EFFICIENCY_FACTOR * ordered[best].eta_mean
    left = ordered[lo].delta_t
    for i in range(best, lo, -1):
        if ordered[i - 1].eta_mean > level:
            left = _crossing(ordered[i], ordered[i - 1], level)
            break
    right = ordered[hi].delta_t
    for i in range(best, hi):
        if ordered[i + 1].eta_mean > level:
            right = _crossing(ordered[i], ordered[i + 1], level)
            break

    return SweepSummary(
        optimal_delta_t=ordered[best].delta_t,
        optimal_eta_mean=ordered[best].eta_mean,
        working_interval=(ordered[lo].delta_t, ordered[hi].delta_t),
        efficiency_interval=(left, right),
        entries=tuple(ordered),
    )
