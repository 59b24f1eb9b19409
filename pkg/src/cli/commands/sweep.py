"""``sweep``: the configured segment once per preconditioner dt.

Writes sweep.csv (one row per dt, flushed as entries finish) and
sweep_summary.json. Failed entries are rows, not errors.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import structlog

from src.services.analysis.sweep import run_sweep
from src.services.continuation.seeding import build_seed
from src.services.problems.factory import build_problem
from src.utils.csv_output import SweepCsvWriter

if TYPE_CHECKING:
    from pathlib import Path

    from src.core.config import Settings
    from src.models.config import RunConfig

logger: structlog.stdlib.BoundLogger = structlog.get_logger()

SWEEP_FILE = "sweep.csv"
SUMMARY_FILE = "sweep_summary.json"


def run_delta_t_sweep(config: RunConfig, output_dir: Path, settings: Settings) -> int:
    seed = build_seed(build_problem(config), config)
    logger.info(
        "sweep_started",
        values=list(config.sweep.delta_t_values),
        blocks=config.sweep.blocks,
        workers=settings.sweep_workers,
    )
    with SweepCsvWriter(output_dir / SWEEP_FILE) as writer:
        summary = run_sweep(config, seed, workers=settings.sweep_workers, on_entry=writer.write)

    (output_dir / SUMMARY_FILE).write_text(summary.model_dump_json(indent=2), encoding="utf-8")
    logger.info(
        "sweep_finished",
        optimal_delta_t=summary.optimal_delta_t,
        optimal_eta_mean=summary.optimal_eta_mean,
        working_interval=summary.working_interval,
        efficiency_interval=summary.efficiency_interval,
    )
    return 0
