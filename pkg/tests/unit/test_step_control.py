"""Tests for continuation step adaptation and the underflow rule."""

import pytest

from src.services.continuation.step_control import UNDERFLOW_RATIO, adapt_step, underflowed
from tests.conftest import make_continuation_config


class TestAdaptStep:
    def test_scripted_schedule(self):
        config = make_continuation_config(delta_lambda_init=1.0, delta_lambda_max=2.0)
        outcomes = [3, 4, 4, 4, 5, None, 2, 10, None, None]
        expected = [1.2, 1.44, 1.728, 2.0, 2.0, 1.8, 2.0, 2.0, 1.8, 1.62]
        step = 1.0
        for outcome, want in zip(outcomes, expected, strict=True):
            step = adapt_step(step, outcome, config)
            assert step == pytest.approx(want, rel=1e-12)

    def test_growth_stops_at_cap(self):
        config = make_continuation_config(delta_lambda_max=0.5)
        assert adapt_step(0.45, 1, config) == 0.5

    def test_explicit_cap_overrides_delta_lambda_max(self):
        config = make_continuation_config(delta_lambda_max=0.5)
        assert adapt_step(1.0, 1, config, cap=3.0) == pytest.approx(1.2)

    def test_slow_convergence_keeps_step_by_default(self):
        config = make_continuation_config()
        assert adapt_step(0.3, config.newton_target + 1, config) == 0.3

    def test_slow_shrink_factor(self):
        config = make_continuation_config(slow_shrink_factor=0.7)
        assert adapt_step(0.3, config.newton_target + 1, config) == pytest.approx(0.21)
        assert adapt_step(0.3, config.newton_target, config) == pytest.approx(0.36)

    def test_negative_step_rejected(self):
        with pytest.raises(ValueError):
            adapt_step(-0.1, 1, make_continuation_config())


class TestUnderflow:
    def test_threshold(self):
        assert underflowed(0.5 * UNDERFLOW_RATIO, 1.0)
        assert not underflowed(2.0 * UNDERFLOW_RATIO, 1.0)

    def test_relative_to_initial_step(self):
        assert not underflowed(1e-13, 1e-2)
        assert underflowed(1e-15, 1e-2)
