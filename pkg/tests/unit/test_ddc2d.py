"""Tests for the 2D doubly diffusive cavity discretization."""

import numpy as np
import pytest

from src.core.exceptions import ContinuationError
from src.models.config import Ddc2dConfig, PreconditionerSpec
from src.services.analysis.verify import jacobian_fd_error
from src.services.preconditioning.stepper import StepperPreconditioner
from src.services.problems.ddc2d import (
    CONCENTRATION,
    DEFAULT_DELTA_T,
    TEMPERATURE,
    VELOCITY,
    Ddc2dProblem,
    face_gradient,
    second_difference,
)

# ===========================================================================
# Operators
# ===========================================================================


class TestOperators:
    def test_layout(self, ddc):
        assert ddc.layout.block_names == (VELOCITY, TEMPERATURE, CONCENTRATION)
        assert ddc.layout.size == 11 * 12 + 12 * 11 + 2 * 144

    def test_neumann_cell_difference_kills_constants(self):
        op = second_difference(8, 0.125, "neumann_cell")
        np.testing.assert_allclose(op @ np.ones(8), 0.0, atol=1e-12)

    def test_face_gradient_of_linear_profile(self):
        h = 0.1
        centres = (np.arange(10) + 0.5) * h
        np.testing.assert_allclose(face_gradient(10, h) @ (3.0 * centres), 3.0, rtol=1e-12)

    def test_divergence_is_negative_gradient_transpose(self, ddc):
        difference = ddc.divergence + ddc.gradient.T
        assert abs(difference).max() == 0.0

    def test_pressure_solution_has_zero_mean(self, ddc, rng):
        source = ddc.divergence @ rng.standard_normal(ddc.gradient.shape[0])
        p = ddc.solve_pressure(source)
        assert abs(p.mean()) < 1e-12
        np.testing.assert_allclose(ddc.divergence @ (ddc.gradient @ p), source, atol=1e-9)


# ===========================================================================
# Steady states and the preconditioned residual
# ===========================================================================


class TestConduction:
    def test_conduction_is_a_fixed_point(self, ddc):
        conduction = ddc.conduction_state()
        for dt in (1e-2, 1.0, 1e6):
            spec = PreconditionerSpec.uniform(ddc.layout.block_names, dt)
            metric = StepperPreconditioner(ddc, spec).convergence_metric(conduction)
            assert metric < 1e-10

    def test_conduction_has_no_kinetic_energy(self, ddc):
        assert ddc.kinetic_energy(ddc.conduction_state()) == 0.0
        assert ddc.diagnostic(ddc.conduction_state()) == 0.0

    def test_fixed_point_for_any_rayleigh(self):
        problem = Ddc2dProblem(Ddc2dConfig(nx=10, nz=10, ra=1e5))
        spec = problem.default_preconditioner()
        metric = StepperPreconditioner(problem, spec).convergence_metric(
            problem.conduction_state()
        )
        assert metric < 1e-10

    def test_default_preconditioner(self, ddc):
        spec = ddc.default_preconditioner()
        assert {b.delta_t for b in spec.blocks} == {DEFAULT_DELTA_T}


class TestJacobian:
    def test_linearized_step_matches_central_differences(self, ddc, rng):
        spec = ddc.default_preconditioner()
        for _ in range(3):
            state = ddc.conduction_state() + 0.1 * rng.standard_normal(ddc.layout.size)
            direction = rng.standard_normal(ddc.layout.size)
            assert jacobian_fd_error(ddc, spec, state, direction) < 1e-5

    def test_nonlinearity_is_quadratic(self, ddc, rng):
        # N(b + d) + N(b - d) - 2 N(b) = 2 B(d, d), independent of b.
        steps = dict.fromkeys(ddc.layout.block_names, DEFAULT_DELTA_T)
        d = 0.1 * rng.standard_normal(ddc.layout.size)

        def second_difference_of_n(base):
            plus = ddc.eval_N(base + d, steps)
            minus = ddc.eval_N(base - d, steps)
            return plus + minus - 2.0 * ddc.eval_N(base, steps)

        first = second_difference_of_n(ddc.conduction_state())
        second = second_difference_of_n(rng.standard_normal(ddc.layout.size))
        np.testing.assert_allclose(first, second, atol=1e-6 * np.abs(first).max())


# ===========================================================================
# Stage-wise stepping
# ===========================================================================


class TestStepping:
    def test_projection_removes_divergence(self, ddc, rng):
        state = ddc.perturbed_conduction(0.1)
        state[ddc.layout.block_slice(VELOCITY)] = 0.1 * rng.standard_normal(
            ddc.gradient.shape[0]
        )
        stages = ddc.step_momentum(state, 1e-3)
        assert np.abs(ddc.divergence @ stages.projected).max() < 1e-8 * max(
            1.0, np.abs(ddc.divergence @ stages.predicted).max()
        )

    def test_scalar_step_keeps_conduction(self, ddc):
        conduction = ddc.conduction_state()
        T = ddc.step_scalar(conduction, "T", 0.1)
        np.testing.assert_allclose(T, ddc.layout.view(conduction, "T"), atol=1e-12)

    def test_step_matches_stepper_advance(self, ddc, rng):
        state = ddc.perturbed_conduction(0.05)
        spec = PreconditionerSpec.uniform(ddc.layout.block_names, 0.01)
        np.testing.assert_allclose(
            ddc.step(state, 0.01), StepperPreconditioner(ddc, spec).advance(state), atol=1e-12
        )

    def test_shifted_factorizations_are_cached(self, ddc, rng):
        steps = dict.fromkeys(ddc.layout.block_names, 0.5)
        rhs = rng.standard_normal(ddc.layout.size)
        first = ddc.solve_shifted(steps, rhs)
        second = ddc.solve_shifted(steps, rhs)
        np.testing.assert_array_equal(first, second)
        assert len(ddc._shifted) == 3

    def test_shifted_solve_inverts_i_minus_dt_l(self, ddc, rng):
        steps = dict.fromkeys(ddc.layout.block_names, 0.3)
        rhs = rng.standard_normal(ddc.layout.size)
        x = ddc.solve_shifted(steps, rhs)
        np.testing.assert_allclose(x - 0.3 * ddc.apply_L(x), rhs, atol=1e-10)

    def test_integration_divergence_raises(self, ddc):
        state = ddc.conduction_state()
        state[0] = np.nan
        with pytest.raises(ContinuationError):
            ddc.integrate(state, 1e-3, 2)

    def test_subcritical_perturbation_decays(self):
        problem = Ddc2dProblem(Ddc2dConfig(nx=10, nz=10, ra=100.0))
        start = problem.perturbed_conduction(0.05)
        end = problem.integrate(start, 1e-2, 50)
        deviation = np.linalg.norm(end - problem.conduction_state())
        assert deviation < np.linalg.norm(start - problem.conduction_state())
