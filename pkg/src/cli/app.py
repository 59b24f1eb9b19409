"""Command-line front door.

    stokes-continuation run    --config run.toml [--set key=value ...] [--output-dir DIR]
    stokes-continuation sweep  --config sweep.toml [--set key=value ...] [--output-dir DIR]
    stokes-continuation verify

Every invocation gets a run id bound to the structlog context together with
the problem name, so all log lines of one run can be correlated. Exit
status: 0 when all requested work succeeded, 1 when the solver failed or a
check did not pass, 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import uuid
from pathlib import Path
from typing import TYPE_CHECKING

import structlog

from src.cli.commands import run_branch, run_checks, run_delta_t_sweep
from src.cli.loader import load_run_config
from src.core.config import Settings
from src.core.exceptions import ConfigurationError, ContinuationError
from src.core.logging import setup_logging

if TYPE_CHECKING:
    from collections.abc import Sequence

logger: structlog.stdlib.BoundLogger = structlog.get_logger()

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stokes-continuation",
        description="Matrix-free Newton-Krylov continuation with a time-stepper preconditioner.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("run", "trace a branch and write branch.csv"),
        ("sweep", "repeat a segment over preconditioner time steps"),
    ):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--config", type=Path, default=None, help="TOML run file")
        sub.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a run-file value, e.g. --set continuation.delta_lambda_max=0.5",
        )
        sub.add_argument("--output-dir", type=Path, default=None)

    commands.add_parser("verify", help="run the oracle checks and print a JSON report")
    return parser


def _output_dir(flag: Path | None, configured: Path | None, settings: Settings) -> Path:
    directory = flag or configured or settings.output_dir
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def main(argv: Sequence[str] | None = None, settings: Settings | None = None) -> int:
    args = create_parser().parse_args(argv)
    settings = settings or Settings()
    setup_logging(settings)

    structlog.contextvars.clear_contextvars()
    structlog.contextvars.bind_contextvars(run_id=uuid.uuid4().hex[:12], command=args.command)

    try:
        if args.command == "verify":
            return run_checks()

        config = load_run_config(args.config, args.overrides, output_dir=args.output_dir)
        structlog.contextvars.bind_contextvars(problem=config.problem.value)
        output_dir = _output_dir(args.output_dir, config.output_dir, settings)
        if args.command == "run":
            return run_branch(config, output_dir, settings)
        return run_delta_t_sweep(config, output_dir, settings)
    except ConfigurationError as exc:
        logger.error("configuration_error", message=exc.message, details=exc.details)
        return EXIT_CONFIG
    except ContinuationError as exc:
        logger.error(
            "run_failed",
            error_type=type(exc).__name__,
            message=exc.message,
            details=exc.details,
        )
        return EXIT_FAILED
