"""End-to-end tests of the command-line entry point.

Every test drives ``main`` with an argv list and a tmp_path output
directory, then inspects the files a run leaves behind.
"""

from __future__ import annotations

import csv
import json
from typing import TYPE_CHECKING

import pytest

from src.cli.app import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, main
from src.cli.commands.run import BRANCH_FILE, METRICS_FILE, snapshot_path
from src.utils.snapshot import read_snapshot

if TYPE_CHECKING:
    from pathlib import Path

pytestmark = pytest.mark.integration

FOLD_RUN = """\
problem = "toy"

[toy]
kind = "fold"

[seed]
state = [1.0]
parameter = 1.0

[continuation]
newton_tol = 1e-10
krylov_tol = 1e-6
delta_lambda_init = 0.1
delta_lambda_max = 0.5

[stop]
parameter_max = 4.0
"""


def _rows(path: Path) -> list[dict[str, str]]:
    with path.open(newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


@pytest.fixture
def fold_file(tmp_path) -> Path:
    path = tmp_path / "fold.toml"
    path.write_text(FOLD_RUN, encoding="utf-8")
    return path


# ===========================================================================
# run
# ===========================================================================


class TestRunCommand:
    def test_fold_branch(self, tmp_path, fold_file, test_settings):
        out = tmp_path / "fold"
        code = main(
            ["run", "--config", str(fold_file), "--output-dir", str(out)], test_settings
        )
        assert code == EXIT_OK

        rows = _rows(out / BRANCH_FILE)
        assert rows[0]["status"] == "seed"
        assert float(rows[-1]["lambda"]) == 4.0
        assert float(rows[-1]["norm"]) == pytest.approx(2.0, abs=1e-8)
        assert [int(r["index"]) for r in rows] == list(range(len(rows)))
        assert (out / METRICS_FILE).exists()

    def test_zero_step_rule(self, tmp_path, fold_file, test_settings):
        out = tmp_path / "zero"
        code = main(
            [
                "run",
                "--config",
                str(fold_file),
                "--set",
                "stop.max_points=0",
                "--output-dir",
                str(out),
            ],
            test_settings,
        )
        assert code == EXIT_OK
        rows = _rows(out / BRANCH_FILE)
        assert len(rows) == 1
        assert float(rows[0]["lambda"]) == 1.0

    def test_snapshots_at_stride(self, tmp_path, fold_file, test_settings):
        out = tmp_path / "snaps"
        code = main(
            [
                "run",
                "--config",
                str(fold_file),
                "--set",
                "snapshot_stride=2",
                "--output-dir",
                str(out),
            ],
            test_settings,
        )
        assert code == EXIT_OK
        seed = read_snapshot(snapshot_path(out, 0))
        assert seed.problem == "toy"
        assert seed.parameter == 1.0
        assert seed.state.tolist() == [1.0]
        assert snapshot_path(out, 2).exists()
        assert not snapshot_path(out, 1).exists()

    def test_waleffe_laminar_branch(self, tmp_path, test_settings):
        out = tmp_path / "waleffe"
        code = main(
            [
                "run",
                "--set",
                "problem=waleffe",
                "--set",
                "waleffe.n_y=16",
                "--set",
                "waleffe.n_z=16",
                "--set",
                "continuation.norm=diagnostic",
                "--set",
                "continuation.delta_lambda_init=10.0",
                "--set",
                "continuation.delta_lambda_max=200.0",
                "--set",
                "stop.parameter_max=2000.0",
                "--output-dir",
                str(out),
            ],
            test_settings,
        )
        assert code == EXIT_OK
        rows = _rows(out / BRANCH_FILE)
        assert float(rows[0]["lambda"]) == 100.0
        assert float(rows[-1]["lambda"]) == 2000.0
        for row in rows:
            assert float(row["norm"]) == pytest.approx(1.0, abs=1e-10)
        assert all(int(row["newton_iters"]) == 1 for row in rows[1:])

    def test_solver_failure_keeps_rows(self, tmp_path, fold_file, test_settings):
        out = tmp_path / "underflow"
        code = main(
            [
                "run",
                "--config",
                str(fold_file),
                "--set",
                "continuation.direction=-1",
                "--set",
                "continuation.delta_lambda_init=5.0",
                "--set",
                "continuation.delta_lambda_max=5.0",
                "--set",
                "continuation.max_step_attempts=3",
                "--set",
                "stop.parameter_min=-10.0",
                "--output-dir",
                str(out),
            ],
            test_settings,
        )
        assert code == EXIT_FAILED
        assert len(_rows(out / BRANCH_FILE)) == 1
        assert (out / METRICS_FILE).exists()


# ===========================================================================
# Configuration errors
# ===========================================================================


class TestConfigurationErrors:
    def test_invalid_value(self, tmp_path, fold_file, test_settings):
        code = main(
            [
                "run",
                "--config",
                str(fold_file),
                "--set",
                "continuation.growth_factor=5.0",
                "--output-dir",
                str(tmp_path / "bad"),
            ],
            test_settings,
        )
        assert code == EXIT_CONFIG

    def test_missing_run_file(self, tmp_path, test_settings):
        code = main(["run", "--config", str(tmp_path / "nope.toml")], test_settings)
        assert code == EXIT_CONFIG

    def test_toy_without_seed(self, tmp_path, test_settings):
        code = main(["run", "--output-dir", str(tmp_path / "noseed")], test_settings)
        assert code == EXIT_CONFIG


# ===========================================================================
# sweep and verify
# ===========================================================================


class TestSweepCommand:
    def test_fold_sweep(self, tmp_path, fold_file, test_settings):
        out = tmp_path / "sweep"
        code = main(
            [
                "sweep",
                "--config",
                str(fold_file),
                "--set",
                "sweep.delta_t_values=[0.5, 1.0, 2.0]",
                "--set",
                "stop.parameter_max=2.0",
                "--output-dir",
                str(out),
            ],
            test_settings,
        )
        assert code == EXIT_OK
        rows = _rows(out / "sweep.csv")
        assert [float(r["delta_t"]) for r in rows] == [0.5, 1.0, 2.0]
        assert all(r["status"] == "converged" for r in rows)
        summary = json.loads((out / "sweep_summary.json").read_text(encoding="utf-8"))
        assert summary["working_interval"] == [0.5, 2.0]


@pytest.mark.slow
class TestVerifyCommand:
    def test_all_checks_pass(self, capsys, test_settings):
        assert main(["verify"], test_settings) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["passed"] is True
        assert {c["name"] for c in report["checks"]} >= {
            "fold_branch_closed_form",
            "waleffe_laminar_fixed_point",
            "ddc_conduction_fixed_point",
        }
