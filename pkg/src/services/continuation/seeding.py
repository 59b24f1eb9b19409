"""Seed points for a branch trace.

builtin           toy: the configured (state, parameter); ddc2d: conduction;
                  waleffe: laminar flow
snapshot          a state written by an earlier run
time_integration  ddc2d only: march a perturbed conduction state at fixed
                  Ra until it settles, then polish it with Newton
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import structlog

from src.core.exceptions import ConfigurationError
from src.models.config import PreconditionerSpec, ProblemName, SeedSource
from src.services.continuation.corrector import correct_fixed_parameter
from src.services.continuation.tracer import make_seed
from src.services.problems.ddc2d import Ddc2dProblem
from src.services.problems.waleffe import WaleffeProblem
from src.utils.snapshot import read_snapshot

if TYPE_CHECKING:
    from src.models.config import RunConfig
    from src.models.domain import BranchPoint
    from src.services.problems.base import Problem

logger: structlog.stdlib.BoundLogger = structlog.get_logger()


def build_seed(problem: Problem, config: RunConfig) -> BranchPoint:
    seed = config.seed
    parameter = seed.parameter if seed.parameter is not None else problem.parameter

    if seed.source is SeedSource.SNAPSHOT:
        assert seed.path is not None  # enforced by SeedConfig
        snapshot = read_snapshot(seed.path)
        if snapshot.problem != problem.name or snapshot.layout != problem.layout:
            raise ConfigurationError(
                "snapshot does not belong to this problem",
                details={"snapshot": snapshot.problem, "layout": snapshot.layout.describe()},
            )
        parameter = seed.parameter if seed.parameter is not None else snapshot.parameter
        logger.info("seed_loaded", path=str(seed.path), parameter=parameter)
        return make_seed(problem, snapshot.state, parameter, config.continuation)

    if seed.source is SeedSource.TIME_INTEGRATION:
        if not isinstance(problem, Ddc2dProblem):
            raise ConfigurationError("time-integration seeds are only available for ddc2d")
        return _integrated_seed(problem, parameter, config)

    if config.problem is ProblemName.TOY:
        if seed.state is None or seed.parameter is None:
            raise ConfigurationError("toy seeds need seed.state and seed.parameter")
        state = np.asarray(seed.state, dtype=np.float64)
        if state.shape != (problem.layout.size,):
            raise ConfigurationError(
                "toy seed has the wrong size",
                details={"expected": problem.layout.size, "got": state.size},
            )
    elif isinstance(problem, Ddc2dProblem):
        state = problem.conduction_state()
    elif isinstance(problem, WaleffeProblem):
        state = problem.laminar_state()
    else:
        raise ConfigurationError(f"no builtin seed for problem {problem.name!r}")
    return make_seed(problem, state, parameter, config.continuation)


def _integrated_seed(problem: Ddc2dProblem, parameter: float, config: RunConfig) -> BranchPoint:
    seed = config.seed
    problem.parameter = parameter
    logger.info(
        "seed_integration_started",
        parameter=parameter,
        steps=seed.steps,
        delta_t=seed.dt,
    )
    state = problem.integrate(problem.perturbed_conduction(seed.amplitude), seed.dt, seed.steps)
    spec = PreconditionerSpec.uniform(problem.layout.block_names, seed.polish_delta_t)
    polished = correct_fixed_parameter(problem, spec, state, parameter, config.continuation)
    logger.info(
        "seed_polished",
        parameter=parameter,
        kinetic_energy=problem.kinetic_energy(polished.state),
        newton_iterations=polished.stats.newton_iterations,
    )
    return make_seed(problem, polished.state, parameter, config.continuation)
