"""Tests for the Newton correctors on algebraic problems with known roots."""

import math

import numpy as np
import pytest

from src.core.exceptions import CorrectionFailure, NonConvergenceError, SingularBorderError
from src.models.domain import NormKind, PseudoArclength
from src.services.continuation.corrector import (
    arclength_residual,
    branch_norm,
    correct_fixed_component,
    correct_fixed_parameter,
    correct_pseudo_arclength,
)
from src.services.problems.algebraic import circle_problem, fold_problem, scalar_linear_problem
from tests.conftest import make_branch_point, make_continuation_config


class TestFixedParameter:
    def test_converges_to_root(self):
        problem = fold_problem()
        spec = problem.default_preconditioner()
        point = correct_fixed_parameter(
            problem, spec, np.array([1.5]), 4.0, make_continuation_config()
        )
        assert point.state[0] == pytest.approx(2.0, abs=1e-10)
        assert point.parameter == 4.0
        assert point.norm == pytest.approx(2.0, abs=1e-10)
        assert point.stats.newton_iterations >= 1
        assert len(point.stats.per_newton) == point.stats.newton_iterations

    def test_exact_guess_takes_no_krylov_work(self):
        problem = fold_problem()
        point = correct_fixed_parameter(
            problem,
            problem.default_preconditioner(),
            np.array([2.0]),
            4.0,
            make_continuation_config(),
        )
        assert point.stats.krylov_iterations_total == 0

    def test_no_root_fails(self):
        problem = fold_problem()
        with pytest.raises(CorrectionFailure):
            correct_fixed_parameter(
                problem,
                problem.default_preconditioner(),
                np.array([0.3]),
                -1.0,
                make_continuation_config(newton_max=5),
            )

    def test_iteration_budget(self):
        problem = fold_problem()
        with pytest.raises(NonConvergenceError):
            correct_fixed_parameter(
                problem,
                problem.default_preconditioner(),
                np.array([10.0]),
                4.0,
                make_continuation_config(newton_max=1),
            )

    def test_quadratic_convergence(self):
        # Metric after n Newton updates, read off the budget-exhausted error.
        problem = fold_problem()
        metrics = []
        for budget in (1, 2, 3):
            with pytest.raises(NonConvergenceError) as exc_info:
                correct_fixed_parameter(
                    problem,
                    problem.default_preconditioner(),
                    np.array([3.0]),
                    4.0,
                    make_continuation_config(newton_max=budget),
                )
            metrics.append(exc_info.value.details["metric"])
        assert metrics[0] == pytest.approx(25.0 / 36.0, rel=1e-6)
        for previous, current in zip(metrics, metrics[1:], strict=False):
            assert current < 0.1 * previous**2
        assert metrics[-1] < 1e-4


class TestFixedComponent:
    def test_solves_for_parameter(self):
        problem = circle_problem()
        point = correct_fixed_component(
            problem,
            problem.default_preconditioner(),
            np.array([0.6]),
            0.7,
            0,
            make_continuation_config(),
        )
        assert point.state[0] == 0.6
        assert point.parameter == pytest.approx(0.8, abs=1e-10)
        assert problem.parameter == point.parameter

    def test_parameter_free_residual_is_singular(self):
        # du/dt = -u does not depend on lambda, so the bordered column is zero.
        problem = scalar_linear_problem(linear=-1.0)
        with pytest.raises(SingularBorderError) as exc_info:
            correct_fixed_component(
                problem,
                problem.default_preconditioner(),
                np.array([0.5]),
                2.0,
                0,
                make_continuation_config(),
            )
        assert exc_info.value.details == {"parameter": 2.0, "component": 0}
        assert isinstance(exc_info.value, CorrectionFailure)


class TestPseudoArclength:
    def test_lands_on_circle_at_distance_delta_s(self):
        problem = circle_problem()
        anchor = make_branch_point(state=np.array([math.sin(0.5)]), parameter=math.cos(0.5))
        tangent = PseudoArclength(
            tangent_state=np.array([math.cos(0.5)]),
            tangent_parameter=-math.sin(0.5),
            delta_s=0.1,
        )
        guess = anchor.state + 0.1 * tangent.tangent_state
        point = correct_pseudo_arclength(
            problem,
            problem.default_preconditioner(),
            guess,
            anchor.parameter + 0.1 * tangent.tangent_parameter,
            tangent,
            anchor,
            make_continuation_config(),
        )
        u, lam = point.state[0], point.parameter
        assert abs(u**2 + lam**2 - 1.0) < 1e-10
        assert abs(arclength_residual(point.state, lam, tangent, anchor)) < 1e-10
        assert u > anchor.state[0]

    def test_arclength_residual(self):
        anchor = make_branch_point(state=np.array([0.0]), parameter=0.0)
        tangent = PseudoArclength(
            tangent_state=np.array([1.0]), tangent_parameter=0.0, delta_s=0.5
        )
        assert arclength_residual(np.array([0.75]), 3.0, tangent, anchor) == pytest.approx(0.25)


class TestBranchNorm:
    def test_rms(self):
        problem = fold_problem()
        assert branch_norm(problem, np.array([-3.0]), NormKind.RMS) == 3.0

    def test_diagnostic(self):
        problem = fold_problem()
        assert branch_norm(problem, np.array([-3.0]), NormKind.DIAGNOSTIC) == -3.0
