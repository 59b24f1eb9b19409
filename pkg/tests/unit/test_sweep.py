"""Tests for preconditioner dt sweeps and their summary."""

import math

import numpy as np
import pytest

from src.models.config import RunConfig
from src.models.domain import SweepStatus
from src.services.analysis.sweep import (
    SweepEntry,
    run_sweep,
    summarize_eta,
    summarize_sweep,
)
from src.services.continuation.seeding import build_seed
from src.services.problems.factory import build_problem


def _entry(delta_t: float, eta_mean: float | None) -> SweepEntry:
    if eta_mean is None:
        return SweepEntry(delta_t=delta_t, status=SweepStatus.FAILED, points_completed=0)
    return SweepEntry(
        delta_t=delta_t, status=SweepStatus.CONVERGED, points_completed=10, eta_mean=eta_mean
    )


class TestSummarizeEta:
    def test_tail_statistics(self):
        entry = summarize_eta(0.1, SweepStatus.CONVERGED, [5, 3, 4, 8, 6], tail_window=3)
        assert entry.points_completed == 5
        assert entry.eta == (5, 3, 4, 8, 6)
        assert entry.eta_mean == pytest.approx(6.0)
        assert entry.eta_std == pytest.approx(math.sqrt(8.0 / 3.0))
        assert entry.eta_min == 4.0
        assert entry.eta_max == 8.0
        assert entry.eta_total == 18

    def test_no_points(self):
        entry = summarize_eta(1.0, SweepStatus.FAILED, [], tail_window=5, error="diverged")
        assert math.isnan(entry.eta_mean)
        assert entry.eta_total == 0
        assert entry.error == "diverged"


class TestSummarizeSweep:
    def test_intervals(self):
        entries = [
            _entry(1.0, 5.0),
            _entry(1e-3, None),
            _entry(1e-2, 12.5),
            _entry(1e-1, 7.5),
            _entry(10.0, 8.0),
            _entry(100.0, None),
            _entry(1e3, 30.0),
        ]
        summary = summarize_sweep(entries)
        assert summary.optimal_delta_t == 1.0
        assert summary.optimal_eta_mean == 5.0
        assert summary.working_interval == (1e-2, 10.0)
        left, right = summary.efficiency_interval
        assert left == pytest.approx(10.0**-1.5)
        assert right == 10.0
        assert [e.delta_t for e in summary.entries] == sorted(e.delta_t for e in entries)

    def test_everything_failed(self):
        summary = summarize_sweep([_entry(0.1, None), _entry(1.0, None)])
        assert summary.optimal_delta_t is None
        assert summary.working_interval is None
        assert len(summary.entries) == 2


class TestRunSweep:
    def test_fold_sweep(self):
        config = RunConfig.model_validate(
            {
                "problem": "toy",
                "seed": {"state": [1.0], "parameter": 1.0},
                "stop": {"parameter_max": 1.5},
                "continuation": {"newton_tol": 1e-10, "krylov_tol": 1e-6},
                "sweep": {"delta_t_values": [2.0, 0.5]},
            }
        )
        seed = build_seed(build_problem(config), config)
        seen = []
        summary = run_sweep(config, seed, on_entry=seen.append)

        assert [e.delta_t for e in seen] == [2.0, 0.5]
        assert all(e.status is SweepStatus.CONVERGED for e in summary.entries)
        assert all(e.points_completed > 0 for e in summary.entries)
        assert all(np.isfinite(e.eta_mean) and e.eta_mean >= 1.0 for e in summary.entries)
        assert summary.working_interval == (0.5, 2.0)
