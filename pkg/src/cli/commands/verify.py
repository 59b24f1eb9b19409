"""``verify``: run the oracle checks and print the report as JSON."""

from __future__ import annotations

import sys

from src.services.analysis.verify import run_verification


def run_checks() -> int:
    report = run_verification()
    sys.stdout.write(report.model_dump_json(indent=2) + "\n")
    return 0 if report.passed else 1
