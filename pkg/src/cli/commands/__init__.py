"""Command implementations, one module per CLI verb."""

from src.cli.commands.run import run_branch
from src.cli.commands.sweep import run_delta_t_sweep
from src.cli.commands.verify import run_checks

__all__ = ["run_branch", "run_checks", "run_delta_t_sweep"]
