"""Shared test fixtures and factory functions.

Factories return valid domain objects with sensible defaults. Override
any field via keyword arguments to create specific test scenarios
without repeating boilerplate. Problem fixtures use coarse grids so the
whole unit suite stays fast.
"""

import numpy as np
import pytest

from src.core.config import Settings
from src.models.config import ContinuationConfig, Ddc2dConfig, StopRule, WaleffeConfig
from src.models.domain import BranchPoint, PredictorHistory, SolverStats
from src.services.problems.ddc2d import Ddc2dProblem
from src.services.problems.waleffe import WaleffeProblem
from src.services.spectral.grid import SpectralGrid

# ---------------------------------------------------------------------------
# Settings
# ---------------------------------------------------------------------------


@pytest.fixture
def test_settings(tmp_path) -> Settings:
    """Settings configured for testing: console logs, output under tmp_path."""
    return Settings(
        output_dir=tmp_path / "runs",
        log_format="console",
        log_level="DEBUG",
        metrics_enabled=True,
        sweep_workers=1,
    )


# ---------------------------------------------------------------------------
# Problem fixtures
# ---------------------------------------------------------------------------


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def grid() -> SpectralGrid:
    return SpectralGrid(n_y=16, n_z=16)


@pytest.fixture
def ddc() -> Ddc2dProblem:
    return Ddc2dProblem(Ddc2dConfig(nx=12, nz=12))


@pytest.fixture
def waleffe() -> WaleffeProblem:
    return WaleffeProblem(WaleffeConfig(n_y=16, n_z=16))


# ---------------------------------------------------------------------------
# Domain model factories
# ---------------------------------------------------------------------------


def make_branch_point(**overrides: object) -> BranchPoint:
    """Build a BranchPoint on the fold u = sqrt(lambda) by default."""
    defaults: dict[str, object] = {
        "state": np.array([1.0]),
        "parameter": 1.0,
        "norm": 1.0,
        "stats": SolverStats(),
    }
    defaults.update(overrides)
    return BranchPoint(**defaults)  # type: ignore[arg-type]


def make_history(parameters: list[float], states: list[list[float]]) -> PredictorHistory:
    """PredictorHistory from matching parameter and state lists (oldest first)."""
    points = tuple(
        make_branch_point(
            state=np.asarray(state, dtype=np.float64),
            parameter=parameter,
            norm=float(np.linalg.norm(state) / np.sqrt(len(state))),
        )
        for parameter, state in zip(parameters, states, strict=True)
    )
    return PredictorHistory(points=points)


def make_continuation_config(**overrides: object) -> ContinuationConfig:
    """Tight-tolerance ContinuationConfig suited to the algebraic problems."""
    defaults: dict[str, object] = {
        "newton_tol": 1e-10,
        "krylov_tol": 1e-6,
        "delta_lambda_init": 0.1,
        "delta_lambda_max": 0.5,
    }
    defaults.update(overrides)
    return ContinuationConfig(**defaults)  # type: ignore[arg-type]


def make_stop_rule(**overrides: object) -> StopRule:
    defaults: dict[str, object] = {"max_points": 200}
    defaults.update(overrides)
    return StopRule(**defaults)  # type: ignore[arg-type]
