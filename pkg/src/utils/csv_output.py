"""Plot-ready CSV output.

Both writers flush after every row so a crashed or interrupted run still
leaves every completed row on disk.
"""

from __future__ import annotations

import csv
from typing import TYPE_CHECKING, Self

if TYPE_CHECKING:
    from pathlib import Path
    from types import TracebackType

    from src.services.analysis.sweep import SweepEntry
    from src.services.continuation.tracer import TraceRecord

BRANCH_COLUMNS = (
    "index",
    "lambda",
    "norm",
    "newton_iters",
    "krylov_iters_total",
    "delta_lambda",
    "mode",
    "status",
)

SWEEP_COLUMNS = (
    "delta_t",
    "status",
    "points_completed",
    "eta_mean",
    "eta_std",
    "eta_min",
    "eta_max",
    "eta_total",
)


class _RowWriter:
    columns: tuple[str, ...] = ()

    def __init__(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        self.path = path
        self._handle = path.open("w", newline="", encoding="utf-8")
        self._writer = csv.writer(self._handle)
        self._writer.writerow(self.columns)
        self._handle.flush()

    def _emit(self, row: list[object]) -> None:
        self._writer.writerow(row)
        self._handle.flush()

    def close(self) -> None:
        self._handle.close()

    def __enter__(self) -> Self:
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        tb: TracebackType | None,
    ) -> None:
        self.close()


class BranchCsvWriter(_RowWriter):
    """branch.csv: one row per recorded branch point (seed included)."""

    columns = BRANCH_COLUMNS

    def write(self, record: TraceRecord) -> None:
        point = record.point
        self._emit(
            [
                record.index,
                repr(point.parameter),
                repr(point.norm),
                point.stats.newton_iterations,
                point.stats.krylov_iterations_total,
                repr(record.delta_lambda),
                record.mode.value,
                record.status.value,
            ]
        )


class SweepCsvWriter(_RowWriter):
    """sweep.csv: one row per preconditioner time step."""

    columns = SWEEP_COLUMNS

    def write(self, entry: SweepEntry) -> None:
        self._emit(
            [
                repr(entry.delta_t),
                entry.status.value,
                entry.points_completed,
                repr(entry.eta_mean),
                repr(entry.eta_std),
                entry.eta_min,
                entry.eta_max,
                entry.eta_total,
            ]
        )
