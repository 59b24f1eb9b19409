"""Tests for run configuration models and run-file loading."""

import pytest
from pydantic import ValidationError

from src.cli.loader import apply_override, load_run_config, parse_override
from src.core.exceptions import ConfigurationError
from src.models.config import (
    ContinuationConfig,
    PreconditionerBlock,
    PreconditionerConfig,
    PreconditionerSpec,
    ProblemName,
    RunConfig,
    SeedConfig,
    SeedSource,
    StopRule,
    ToyKind,
    WaleffeConfig,
)
from src.models.domain import ContinuationMode

# ===========================================================================
# Models
# ===========================================================================


class TestContinuationConfig:
    def test_defaults(self):
        config = ContinuationConfig()
        assert config.mode is ContinuationMode.FIXED_PARAMETER
        assert config.growth_factor == 1.2
        assert config.shrink_factor == 0.9
        assert config.newton_target == 4
        assert config.krylov.rel_tol == config.krylov_tol

    @pytest.mark.parametrize("growth", [1.0, 1.4, 2.0])
    def test_growth_factor_range(self, growth):
        with pytest.raises(ValidationError):
            ContinuationConfig(growth_factor=growth)

    def test_initial_step_must_fit_cap(self):
        with pytest.raises(ValidationError):
            ContinuationConfig(delta_lambda_init=2.0, delta_lambda_max=1.0)

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValidationError):
            ContinuationConfig(newton_tolerance=1e-6)

    def test_arclength_cap_defaults_to_delta_s(self):
        assert ContinuationConfig(delta_s=0.3).arclength_cap == 0.3
        assert ContinuationConfig(delta_s=0.3, delta_s_max=0.5).arclength_cap == 0.5


class TestStopRule:
    def test_bounds_ordered(self):
        with pytest.raises(ValidationError):
            StopRule(parameter_min=2.0, parameter_max=1.0)

    def test_contains(self):
        rule = StopRule(parameter_min=0.0, parameter_max=4.0)
        assert rule.contains(4.0)
        assert not rule.contains(4.0001)


class TestPreconditionerModels:
    def test_c_allowed_in_stokes_limit(self):
        block = PreconditionerBlock(name="T", delta_t=1e8, c=1.0)
        assert block.c == 1.0

    def test_c_rejected_outside_stokes_limit(self):
        with pytest.raises(ValidationError):
            PreconditionerBlock(name="T", delta_t=0.5, c=1.0)

    def test_c_rejected_for_parameter_step(self):
        with pytest.raises(ValidationError):
            PreconditionerBlock(name="mean", delta_t="parameter", c=1.0)

    def test_non_positive_step_rejected(self):
        with pytest.raises(ValidationError):
            PreconditionerBlock(name="T", delta_t=0.0)

    def test_duplicate_blocks_rejected(self):
        block = PreconditionerBlock(name="T", delta_t=1.0)
        with pytest.raises(ValidationError):
            PreconditionerSpec(blocks=(block, block))

    def test_with_delta_t_on_selected_blocks(self):
        spec = PreconditionerSpec(
            blocks=(
                PreconditionerBlock(name="a", delta_t=1e8, c=1.0),
                PreconditionerBlock(name="b", delta_t=1.0),
            )
        )
        changed = spec.with_delta_t(0.1, names=["a"])
        assert changed.block("a").delta_t == 0.1
        assert changed.block("a").c is None
        assert changed.block("b").delta_t == 1.0

    def test_resolve_applies_uniform_step_then_overrides(self):
        default = PreconditionerSpec.uniform(["a", "b"], 0.06)
        config = PreconditionerConfig(
            delta_t=1.0, blocks=(PreconditionerBlock(name="b", delta_t=5.0),)
        )
        resolved = config.resolve(default)
        assert resolved.block("a").delta_t == 1.0
        assert resolved.block("b").delta_t == 5.0

    def test_resolve_rejects_unknown_blocks(self):
        config = PreconditionerConfig(blocks=(PreconditionerBlock(name="x", delta_t=1.0),))
        with pytest.raises(ValueError):
            config.resolve(PreconditionerSpec.uniform(["a"], 1.0))


class TestProblemModels:
    def test_waleffe_needs_even_nz(self):
        with pytest.raises(ValidationError):
            WaleffeConfig(n_z=15)

    def test_snapshot_seed_needs_path(self):
        with pytest.raises(ValidationError):
            SeedConfig(source=SeedSource.SNAPSHOT)


# ===========================================================================
# Loading
# ===========================================================================


class TestOverrides:
    def test_toml_literals(self):
        assert parse_override("continuation.newton_tol=1e-9") == (
            ["continuation", "newton_tol"],
            1e-9,
        )
        assert parse_override("seed.state=[1.0]") == (["seed", "state"], [1.0])
        assert parse_override('toy.kind="circle"') == (["toy", "kind"], "circle")

    def test_bare_strings(self):
        assert parse_override("problem=waleffe") == (["problem"], "waleffe")

    @pytest.mark.parametrize("text", ["no_equals", "=1", "a..b=1"])
    def test_malformed(self, text):
        with pytest.raises(ConfigurationError):
            parse_override(text)

    def test_apply_creates_tables(self):
        data: dict = {}
        apply_override(data, ["stop", "parameter_max"], 4.0)
        assert data == {"stop": {"parameter_max": 4.0}}

    def test_apply_into_scalar_fails(self):
        data = {"stop": 3}
        with pytest.raises(ConfigurationError):
            apply_override(data, ["stop", "parameter_max"], 4.0)


class TestLoadRunConfig:
    def test_defaults_without_file(self):
        config = load_run_config()
        assert config == RunConfig()

    def test_file_and_overrides(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text(
            'problem = "toy"\n'
            "[toy]\n"
            'kind = "fold"\n'
            "[seed]\n"
            "state = [1.0]\n"
            "parameter = 1.0\n"
            "[stop]\n"
            "parameter_max = 2.0\n",
            encoding="utf-8",
        )
        config = load_run_config(
            path, ["stop.parameter_max=4.0", "toy.kind=circle"], output_dir=tmp_path / "out"
        )
        assert config.problem is ProblemName.TOY
        assert config.toy.kind is ToyKind.CIRCLE
        assert config.seed.state == (1.0,)
        assert config.stop.parameter_max == 4.0
        assert config.output_dir == tmp_path / "out"

    def test_validation_errors_are_collected(self):
        with pytest.raises(ConfigurationError) as exc_info:
            load_run_config(None, ["continuation.growth_factor=3.0", "stop.max_points=-1"])
        locations = {err["loc"] for err in exc_info.value.details["errors"]}
        assert "stop.max_points" in locations

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError):
            load_run_config(None, ["continuation.newton_tolerance=1e-6"])

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_run_config(tmp_path / "missing.toml")

    def test_invalid_toml(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("problem = \n", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_run_config(path)
