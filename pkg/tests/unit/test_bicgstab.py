"""Tests for the matrix-free BiCGStab solver.

Covers: dense direct-solve oracle, the residual certificate, the zero
right-hand side, breakdown on a singular operator, and the iteration cap.
"""

import numpy as np
import pytest

from src.core.exceptions import BreakdownError, KrylovFailure, MaxItersExceededError
from src.models.config import KrylovConfig
from src.services.krylov.bicgstab import bicgstab


def _well_conditioned(rng: np.random.Generator, n: int) -> np.ndarray:
    return 4.0 * np.eye(n) + rng.standard_normal((n, n)) / np.sqrt(n)


# ===========================================================================
# Convergence
# ===========================================================================


class TestConvergence:
    def test_matches_direct_solve(self, rng):
        config = KrylovConfig(rel_tol=1e-10)
        for n in (2, 7, 30, 50):
            matrix = _well_conditioned(rng, n)
            rhs = rng.standard_normal(n)
            x, iterations = bicgstab(lambda v, m=matrix: m @ v, rhs, config)
            np.testing.assert_allclose(x, np.linalg.solve(matrix, rhs), rtol=1e-7, atol=1e-8)
            assert iterations >= 1

    def test_residual_certificate_holds(self, rng):
        config = KrylovConfig()
        for _ in range(25):
            n = int(rng.integers(2, 51))
            matrix = _well_conditioned(rng, n)
            rhs = rng.standard_normal(n)
            x, _ = bicgstab(lambda v, m=matrix: m @ v, rhs, config)
            assert np.linalg.norm(matrix @ x - rhs) <= config.rel_tol * np.linalg.norm(rhs)

    def test_zero_rhs_returns_zero_without_iterating(self):
        calls = []

        def apply(v):
            calls.append(v)
            return v

        x, iterations = bicgstab(apply, np.zeros(5), KrylovConfig())
        assert iterations == 0
        assert not calls
        np.testing.assert_array_equal(x, np.zeros(5))

    def test_scalar_system_is_exact_in_one_iteration(self):
        x, iterations = bicgstab(lambda v: -4.0 * v, np.array([2.0]), KrylovConfig())
        assert iterations == 1
        assert x[0] == pytest.approx(-0.5, rel=1e-15)

    def test_deterministic(self, rng):
        matrix = _well_conditioned(rng, 20)
        rhs = rng.standard_normal(20)
        first = bicgstab(lambda v: matrix @ v, rhs, KrylovConfig(rel_tol=1e-6))
        second = bicgstab(lambda v: matrix @ v, rhs, KrylovConfig(rel_tol=1e-6))
        np.testing.assert_array_equal(first[0], second[0])
        assert first[1] == second[1]


# ===========================================================================
# Failures
# ===========================================================================


class TestFailures:
    def test_singular_operator_breaks_down(self):
        with pytest.raises(BreakdownError) as exc_info:
            bicgstab(lambda v: np.zeros_like(v), np.ones(3), KrylovConfig())
        assert exc_info.value.details["quantity"] == "r_hat_v"
        assert exc_info.value.iterations == 1

    def test_iteration_cap(self, rng):
        matrix = np.diag(np.linspace(1.0, 1e4, 40))
        rhs = rng.standard_normal(40)
        with pytest.raises(MaxItersExceededError) as exc_info:
            bicgstab(lambda v: matrix @ v, rhs, KrylovConfig(rel_tol=1e-12, max_iters=2))
        assert exc_info.value.iterations == 2

    def test_failures_are_krylov_failures(self):
        assert issubclass(BreakdownError, KrylovFailure)
        assert issubclass(MaxItersExceededError, KrylovFailure)
