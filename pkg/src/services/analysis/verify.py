"""Cross-module oracle checks.

Every check compares a solver quantity against an independent oracle
(closed form, dense direct solve, central finite differences, exact fixed
point) on coarse grids and reports the measured error next to its
threshold. ``run_verification`` runs the whole suite.
"""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, computed_field

from src.models.config import (
    ContinuationConfig,
    Ddc2dConfig,
    KrylovConfig,
    PreconditionerSpec,
    StopRule,
    WaleffeConfig,
)
from src.services.continuation.tracer import make_seed, trace_branch
from src.services.krylov.bicgstab import bicgstab
from src.services.preconditioning.stepper import StepperPreconditioner
from src.services.problems.algebraic import fold_problem
from src.services.problems.ddc2d import Ddc2dProblem
from src.services.problems.waleffe import FLUCTUATION, MEAN, WaleffeProblem

if TYPE_CHECKING:
    from collections.abc import Callable

    from src.models.domain import FloatArray
    from src.services.problems.base import Problem

logger: structlog.stdlib.BoundLogger = structlog.get_logger()

FD_EPSILON = 1e-6
COARSE = 16


class CheckResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    passed: bool
    measured: float
    threshold: float


class VerificationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    checks: tuple[CheckResult, ...]

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)


def _check(name: str, measured: float, threshold: float) -> CheckResult:
    passed = math.isfinite(measured) and measured < threshold
    logger.info("check_finished", check=name, measured=measured, threshold=threshold, passed=passed)
    return CheckResult(name=name, passed=passed, measured=measured, threshold=threshold)


def _relative(a: FloatArray, b: FloatArray) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def _coarse_ddc() -> Ddc2dProblem:
    return Ddc2dProblem(Ddc2dConfig(nx=COARSE, nz=COARSE))


def _coarse_waleffe() -> WaleffeProblem:
    return WaleffeProblem(WaleffeConfig(n_y=COARSE, n_z=COARSE))


def _waleffe_spec(dt_mean: float | str, dt_fluct: float) -> PreconditionerSpec:
    return PreconditionerSpec.model_validate(
        {"blocks": [{"name": MEAN, "delta_t": dt_mean}, {"name": FLUCTUATION, "delta_t": dt_fluct}]}
    )


# ---------------------------------------------------------------------------
# Fixed points
# ---------------------------------------------------------------------------


def check_waleffe_laminar() -> list[CheckResult]:
    problem = _coarse_waleffe()
    laminar = problem.laminar_state()
    metric = max(
        StepperPreconditioner(problem, _waleffe_spec("parameter", dt2)).convergence_metric(laminar)
        for dt2 in (0.5, 2.0, 10.0)
    )
    return [
        _check("waleffe_laminar_fixed_point", metric, 1e-12),
        _check("waleffe_laminar_n_u", abs(problem.n_u(laminar) - 1.0), 1e-12),
    ]


def check_ddc_conduction() -> CheckResult:
    problem = _coarse_ddc()
    conduction = problem.conduction_state()
    metric = max(
        StepperPreconditioner(
            problem, PreconditionerSpec.uniform(problem.layout.block_names, dt)
        ).convergence_metric(conduction)
        for dt in (1e-2, 1.0, 1e6)
    )
    return _check("ddc_conduction_fixed_point", metric, 1e-10)


# ---------------------------------------------------------------------------
# Jacobian consistency
# ---------------------------------------------------------------------------


def jacobian_fd_error(
    problem: Problem,
    spec: PreconditionerSpec,
    state: FloatArray,
    direction: FloatArray,
    epsilon: float = FD_EPSILON,
) -> float:
    """Linearized step against central differences of the nonlinear step."""
    precond = StepperPreconditioner(problem, spec)
    exact = precond.advance_linearized(state, direction)
    forward = precond.advance(state + epsilon * direction)
    backward = precond.advance(state - epsilon * direction)
    fd = (forward - backward) / (2.0 * epsilon)
    return _relative(exact, fd)


def check_jacobians(samples: int = 20, seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    ddc = _coarse_ddc()
    waleffe = _coarse_waleffe()
    cases: list[tuple[str, Problem, Callable[[], FloatArray]]] = [
        ("ddc2d", ddc, lambda: ddc.conduction_state() + 0.1 * rng.standard_normal(ddc.layout.size)),
        ("waleffe", waleffe, lambda: waleffe.random_state(rng, 0.1)),
    ]
    results = []
    for label, problem, draw in cases:
        spec = problem.default_preconditioner()
        worst = max(jacobian_fd_error(problem, spec, draw(), draw()) for _ in range(samples))
        results.append(_check(f"jacobian_fd_{label}", worst, 1e-5))
    return results


# ---------------------------------------------------------------------------
# Preconditioner limits
# ---------------------------------------------------------------------------


def identity_limit_error(problem: Problem, state: FloatArray, delta_t: float = 1e-8) -> float:
    """residual_action / dt against the directly assembled N(u) + L u."""
    spec = PreconditionerSpec.uniform(problem.layout.block_names, delta_t)
    steps = dict.fromkeys(problem.layout.block_names, delta_t)
    action = StepperPreconditioner(problem, spec).residual_action(state) / delta_t
    return _relative(action, problem.residual(state, steps))


def stokes_limit_error(
    problem: Ddc2dProblem | WaleffeProblem,
    state: FloatArray,
    delta_t: float = 1e8,
) -> float:
    """residual_action against the direct solve of L x = -F, null modes projected."""
    spec = PreconditionerSpec.uniform(problem.layout.block_names, delta_t)
    steps = dict.fromkeys(problem.layout.block_names, delta_t)
    action = StepperPreconditioner(problem, spec).residual_action(state)
    direct = -problem.solve_L(problem.residual(state, steps))
    return _relative(problem.project_null_modes(action), direct)


def check_limits(seed: int = 1) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    ddc = _coarse_ddc()
    waleffe = _coarse_waleffe()
    ddc_state = ddc.conduction_state() + 0.1 * rng.standard_normal(ddc.layout.size)
    waleffe_state = waleffe.random_state(rng, 0.1)
    return [
        _check("identity_limit_ddc2d", identity_limit_error(ddc, ddc_state), 1e-4),
        _check("identity_limit_waleffe", identity_limit_error(waleffe, waleffe_state), 1e-4),
        _check("stokes_limit_ddc2d", stokes_limit_error(ddc, ddc_state), 1e-4),
        _check("stokes_limit_waleffe", stokes_limit_error(waleffe, waleffe_state), 1e-4),
    ]


# ---------------------------------------------------------------------------
# Krylov and continuation
# ---------------------------------------------------------------------------


def check_bicgstab(systems: int = 100, seed: int = 2) -> list[CheckResult]:
    """Random diagonally dominant systems against numpy's direct solve.

    Each system is solved to rel_tol / cond(A), so a certified solution
    also lies within rel_tol of the direct solution.
    """
    rng = np.random.default_rng(seed)
    tolerance = KrylovConfig().rel_tol
    worst_residual = 0.0
    worst_forward = 0.0
    for _ in range(systems):
        n = int(rng.integers(2, 51))
        matrix = 4.0 * np.eye(n) + rng.standard_normal((n, n)) / np.sqrt(n)
        rhs = rng.standard_normal(n)
        config = KrylovConfig(rel_tol=tolerance / float(np.linalg.cond(matrix)))
        x, _ = bicgstab(lambda v, m=matrix: m @ v, rhs, config)
        direct = np.linalg.solve(matrix, rhs)
        worst_residual = max(
            worst_residual, float(np.linalg.norm(matrix @ x - rhs) / np.linalg.norm(rhs))
        )
        worst_forward = max(worst_forward, _relative(x, direct))
    return [
        _check("bicgstab_residual_certificate", worst_residual, tolerance * (1 + 1e-9)),
        _check("bicgstab_matches_direct", worst_forward, tolerance * (1 + 1e-9)),
    ]


def check_fold_branch() -> CheckResult:
    """F = lambda - u^2 traced from (1, 1) to lambda = 4 against u = sqrt(lambda)."""
    problem = fold_problem(1.0)
    config = ContinuationConfig(newton_tol=1e-10, delta_lambda_init=0.1, delta_lambda_max=0.5)
    seed = make_seed(problem, np.array([1.0]), 1.0, config)
    branch = trace_branch(
        problem,
        problem.default_preconditioner(),
        seed,
        config,
        StopRule(max_points=200, parameter_max=4.0),
    )
    worst = max(abs(p.state[0] - math.sqrt(p.parameter)) for p in branch)
    if not math.isclose(branch[-1].parameter, 4.0, abs_tol=1e-12):
        worst = math.inf
    return _check("fold_branch_closed_form", worst, 1e-8)


def run_verification() -> VerificationReport:
    checks: list[CheckResult] = []
    checks += check_waleffe_laminar()
    checks.append(check_ddc_conduction())
    checks += check_jacobians()
    checks += check_limits()
    checks += check_bicgstab()
    checks.append(check_fold_branch())
    report = VerificationReport(checks=tuple(checks))
    logger.info("verification_finished", passed=report.passed, checks=len(checks))
    return report
