"""``run``: trace one branch and write branch.csv plus snapshots.

Rows are flushed as points converge. When the trace fails the rows written
so far stay on disk, the failure is logged as ``run_failed`` and the exit
status is non-zero.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import structlog

from src.core.exceptions import ContinuationError
from src.core.metrics import SolverMetrics
from src.services.continuation.seeding import build_seed
from src.services.continuation.tracer import trace_branch
from src.services.problems.factory import build_problem, resolve_preconditioner
from src.utils.csv_output import BranchCsvWriter
from src.utils.snapshot import Snapshot, write_snapshot

if TYPE_CHECKING:
    from pathlib import Path

    from src.core.config import Settings
    from src.models.config import RunConfig
    from src.services.continuation.tracer import TraceRecord
    from src.services.problems.base import Problem

logger: structlog.stdlib.BoundLogger = structlog.get_logger()

BRANCH_FILE = "branch.csv"
METRICS_FILE = "metrics.prom"
SNAPSHOT_DIR = "snapshots"


def snapshot_path(output_dir: Path, index: int) -> Path:
    return output_dir / SNAPSHOT_DIR / f"point_{index:05d}.bin"


def _snapshot(problem: Problem, record: TraceRecord) -> Snapshot:
    return Snapshot(
        problem=problem.name,
        parameter=record.point.parameter,
        layout=problem.layout,
        state=record.point.state,
        parameters={k: float(v) for k, v in problem.parameter_values().items()},
    )


def run_branch(config: RunConfig, output_dir: Path, settings: Settings) -> int:
    """Trace the configured branch; returns the process exit status."""
    problem = build_problem(config)
    spec = resolve_preconditioner(problem, config)
    seed = build_seed(problem, config)
    metrics = SolverMetrics() if settings.metrics_enabled else None
    stride = config.snapshot_stride

    logger.info(
        "run_started",
        parameter=seed.parameter,
        mode=config.continuation.mode.value,
        output_dir=str(output_dir),
    )
    with BranchCsvWriter(output_dir / BRANCH_FILE) as writer:

        def observe(record: TraceRecord) -> None:
            writer.write(record)
            if stride and record.index % stride == 0:
                write_snapshot(snapshot_path(output_dir, record.index), _snapshot(problem, record))

        try:
            branch = trace_branch(
                problem,
                spec,
                seed,
                config.continuation,
                config.stop,
                observer=observe,
                metrics=metrics,
            )
        except ContinuationError as exc:
            logger.error(
                "run_failed",
                error_type=type(exc).__name__,
                message=exc.message,
                details=exc.details,
            )
            return 1
        finally:
            if metrics is not None:
                metrics.write(output_dir / METRICS_FILE)

    logger.info("run_finished", points=len(branch) - 1, parameter=branch[-1].parameter)
    return 0
