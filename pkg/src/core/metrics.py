"""Prometheus solver metrics.

Each run owns a private CollectorRegistry so concurrent sweep entries never
share counters. At the end of a run the registry is written in the text
exposition format (node-exporter textfile collector layout).
"""

from __future__ import annotations

from typing import TYPE_CHECKING

from prometheus_client import CollectorRegistry, Counter, Histogram, write_to_textfile

if TYPE_CHECKING:
    from pathlib import Path

_ETA_BUCKETS = (1, 5, 10, 25, 50, 100, 200, 400, 800, 1600, 3200, 6400)


class SolverMetrics:
    """Counters and histograms describing one continuation run."""

    def __init__(self) -> None:
        self.registry = CollectorRegistry()
        self.points = Counter(
            "continuation_points_total",
            "Converged continuation points",
            ["mode"],
            registry=self.registry,
        )
        self.step_failures = Counter(
            "continuation_step_failures_total",
            "Rejected continuation attempts",
            ["reason"],
            registry=self.registry,
        )
        self.newton_iterations = Counter(
            "newton_iterations_total",
            "Newton iterations spent on converged points",
            registry=self.registry,
        )
        self.eta = Histogram(
            "krylov_iterations_per_point",
            "Krylov iterations needed to converge one continuation point",
            buckets=_ETA_BUCKETS,
            registry=self.registry,
        )

    def record_point(self, *, mode: str, newton_iterations: int, krylov_iterations: int) -> None:
        self.points.labels(mode=mode).inc()
        self.newton_iterations.inc(newton_iterations)
        self.eta.observe(krylov_iterations)

    def record_failure(self, reason: str) -> None:
        self.step_failures.labels(reason=reason).inc()

    def write(self, path: Path) -> None:
        """Write the registry in Prometheus text format."""
        write_to_textfile(str(path), self.registry)
