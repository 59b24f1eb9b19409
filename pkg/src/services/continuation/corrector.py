"""Newton correctors.

All three correctors run pure (undamped) Newton on the preconditioned
system c P^-1 F(u) = 0 built by the stepper preconditioner, inverting the
preconditioned Jacobian with matrix-free BiCGStab and updating
u <- u - du until the convergence metric drops below ``newton_tol``.

- fixed parameter: lambda frozen, n unknowns;
- fixed component: u_k frozen, lambda joins the unknowns in slot k;
- pseudo-arclength: n + 1 unknowns, bordered by the tangent row.

Border rows and the parameter-derivative column are not preconditioned;
only the n x n physics block carries c P^-1.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import structlog

from src.core.exceptions import NonConvergenceError, SingularBorderError
from src.models.domain import BranchPoint, CorrectionKind, NormKind, SolverStats
from src.services.krylov.bicgstab import bicgstab
from src.services.preconditioning.stepper import StepperPreconditioner

if TYPE_CHECKING:
    from collections.abc import Callable

    from src.models.config import ContinuationConfig, PreconditionerSpec
    from src.models.domain import FloatArray, PseudoArclength
    from src.services.problems.base import Problem

logger: structlog.stdlib.BoundLogger = structlog.get_logger()

SINGULAR_BORDER_EPS = 1e-12


def branch_norm(problem: Problem, state: FloatArray, kind: NormKind) -> float:
    """Scalar branch norm: ||u|| / sqrt(n), or the problem's diagnostic."""
    if kind is NormKind.DIAGNOSTIC:
        return problem.diagnostic(state)
    return float(np.linalg.norm(state) / np.sqrt(state.size))


def _check_finite(metric: float, iteration: int, parameter: float) -> None:
    if not np.isfinite(metric):
        raise NonConvergenceError(
            "Newton diverged to a non-finite residual",
            details={"iteration": iteration, "parameter": parameter},
        )


def _non_convergence(
    config: ContinuationConfig, metric: float, parameter: float
) -> NonConvergenceError:
    logger.info(
        "newton_not_converged",
        newton_max=config.newton_max,
        metric=metric,
        parameter=parameter,
    )
    return NonConvergenceError(
        f"Newton did not converge in {config.newton_max} iterations",
        details={"metric": metric, "parameter": parameter},
    )


def _converged(
    problem: Problem,
    state: FloatArray,
    parameter: float,
    per_newton: list[int],
    config: ContinuationConfig,
    kind: CorrectionKind,
    metric: float,
) -> BranchPoint:
    stats = SolverStats(newton_iterations=max(len(per_newton), 1), per_newton=tuple(per_newton))
    logger.debug(
        "newton_converged",
        corrector=kind.value,
        parameter=parameter,
        metric=metric,
        newton_iterations=stats.newton_iterations,
        krylov_iterations=stats.krylov_iterations_total,
    )
    return BranchPoint(
        state=state,
        parameter=parameter,
        norm=branch_norm(problem, state, config.norm),
        stats=stats,
    )


def correct_fixed_parameter(
    problem: Problem,
    spec: PreconditionerSpec,
    guess: FloatArray,
    parameter: float,
    config: ContinuationConfig,
) -> BranchPoint:
    """Newton at frozen lambda."""
    precond = StepperPreconditioner(problem, spec)
    problem.parameter = parameter
    u = np.array(guess, dtype=np.float64, copy=True)
    per_newton: list[int] = []

    for iteration in range(config.newton_max + 1):
        residual = precond.residual_action(u)
        metric = precond.metric_of(residual)
        _check_finite(metric, iteration, parameter)
        logger.debug("newton_iteration", iteration=iteration, metric=metric)
        if metric < config.newton_tol:
            return _converged(
                problem, u, parameter, per_newton, config, CorrectionKind.FIXED_LAMBDA, metric
            )
        if iteration == config.newton_max:
            break
        update, krylov_iterations = bicgstab(
            precond.jacobian_operator(u), residual, config.krylov
        )
        per_newton.append(krylov_iterations)
        u = u - update

    raise _non_convergence(config, metric, parameter)


def correct_fixed_component(
    problem: Problem,
    spec: PreconditionerSpec,
    guess: FloatArray,
    parameter_guess: float,
    k: int,
    config: ContinuationConfig,
) -> BranchPoint:
    """Newton with u_k frozen and lambda solved for in its place.

    The Jacobian column k is replaced by dR/dlambda, so slot k of the
    Newton update carries the parameter correction.
    """
    precond = StepperPreconditioner(problem, spec)
    u = np.array(guess, dtype=np.float64, copy=True)
    lam = float(parameter_guess)
    problem.parameter = lam
    per_newton: list[int] = []

    for iteration in range(config.newton_max + 1):
        residual = precond.residual_action(u)
        metric = precond.metric_of(residual)
        _check_finite(metric, iteration, lam)
        logger.debug("newton_iteration", iteration=iteration, metric=metric, parameter=lam)
        if metric < config.newton_tol:
            return _converged(
                problem, u, lam, per_newton, config, CorrectionKind.FIXED_COMPONENT, metric
            )
        if iteration == config.newton_max:
            break

        d_lambda = precond.parameter_derivative(u, residual)
        if np.linalg.norm(d_lambda) <= SINGULAR_BORDER_EPS:
            raise SingularBorderError(
                "parameter derivative of the residual vanishes",
                details={"parameter": lam, "component": k},
            )
        bordered = _component_bordered(precond.jacobian_operator(u), d_lambda, k)
        update, krylov_iterations = bicgstab(bordered, residual, config.krylov)
        per_newton.append(krylov_iterations)
        lam -= float(update[k])
        update[k] = 0.0
        u = u - update
        problem.parameter = lam

    raise _non_convergence(config, metric, lam)


def arclength_residual(
    state: FloatArray,
    parameter: float,
    tangent: PseudoArclength,
    anchor: BranchPoint,
) -> float:
    """sigma = t_u.(u - u_a) + t_lambda (lambda - lambda_a) - delta_s."""
    return float(
        tangent.tangent_state @ (state - anchor.state)
        + tangent.tangent_parameter * (parameter - anchor.parameter)
        - tangent.delta_s
    )


def correct_pseudo_arclength(
    problem: Problem,
    spec: PreconditionerSpec,
    guess: FloatArray,
    parameter_guess: float,
    tangent: PseudoArclength,
    anchor: BranchPoint,
    config: ContinuationConfig,
) -> BranchPoint:
    """Bordered Newton constrained to the hyperplane at distance delta_s."""
    precond = StepperPreconditioner(problem, spec)
    u = np.array(guess, dtype=np.float64, copy=True)
    lam = float(parameter_guess)
    per_newton: list[int] = []

    for iteration in range(config.newton_max + 1):
        problem.parameter = lam
        residual = precond.residual_action(u)
        metric = precond.metric_of(residual)
        sigma = arclength_residual(u, lam, tangent, anchor)
        _check_finite(metric + abs(sigma), iteration, lam)
        logger.debug(
            "newton_iteration", iteration=iteration, metric=metric, sigma=sigma, parameter=lam
        )
        if metric < config.newton_tol and abs(sigma) < config.newton_tol:
            return _converged(
                problem, u, lam, per_newton, config, CorrectionKind.PSEUDO_ARCLENGTH, metric
            )
        if iteration == config.newton_max:
            break

        d_lambda = precond.parameter_derivative(u, residual)
        bordered = _arclength_bordered(precond.jacobian_operator(u), d_lambda, tangent)
        update, krylov_iterations = bicgstab(bordered, np.append(residual, sigma), config.krylov)
        per_newton.append(krylov_iterations)
        u = u - update[:-1]
        lam -= float(update[-1])

    raise _non_convergence(config, metric, lam)


def _component_bordered(
    jacobian: Callable[[FloatArray], FloatArray],
    d_lambda: FloatArray,
    k: int,
) -> Callable[[FloatArray], FloatArray]:
    def apply(z: FloatArray) -> FloatArray:
        w = z.copy()
        w[k] = 0.0
        return jacobian(w) + d_lambda * z[k]

    return apply


def _arclength_bordered(
    jacobian: Callable[[FloatArray], FloatArray],
    d_lambda: FloatArray,
    tangent: PseudoArclength,
) -> Callable[[FloatArray], FloatArray]:
    t_u, t_lam = tangent.tangent_state, tangent.tangent_parameter

    def apply(z: FloatArray) -> FloatArray:
        du, dlam = z[:-1], z[-1]
        return np.append(jacobian(du) + d_lambda * dlam, t_u @ du + t_lam * dlam)

    return apply
