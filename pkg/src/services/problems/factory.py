"""Problem construction from a validated run configuration."""

from __future__ import annotations

from typing import TYPE_CHECKING

from src.core.exceptions import ConfigurationError
from src.models.config import ProblemName
from src.services.problems.algebraic import build_toy
from src.services.problems.ddc2d import Ddc2dProblem
from src.services.problems.waleffe import WaleffeProblem

if TYPE_CHECKING:
    from src.models.config import PreconditionerSpec, RunConfig
    from src.services.problems.base import Problem


def build_problem(config: RunConfig) -> Problem:
    if config.problem is ProblemName.TOY:
        return build_toy(config.toy.kind, config.seed.parameter or 0.0)
    if config.problem is ProblemName.DDC2D:
        return Ddc2dProblem(config.ddc2d)
    return WaleffeProblem(config.waleffe)


def resolve_preconditioner(problem: Problem, config: RunConfig) -> PreconditionerSpec:
    """The problem's default blocks with the run file's overrides applied."""
    try:
        return config.preconditioner.resolve(problem.default_preconditioner())
    except ValueError as exc:
        raise ConfigurationError(str(exc), details={"problem": problem.name}) from exc
