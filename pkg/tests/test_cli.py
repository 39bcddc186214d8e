"""CLI tests using click's CliRunner."""
import csv
import json

import pytest
from click.testing import CliRunner

from edgereg.cli import (
    EXIT_ERROR,
    EXIT_NOT_CONVERGED,
    main,
    parse_cycles,
)
from edgereg.errors import ConfigError

FAST = ["--lambda-grid", "1:-3:12", "--max-iter", "50"]


@pytest.fixture
def runner():
    return CliRunner()


class TestGenerate:
    def test_writes_problem_directory(self, runner, tmp_path):
        out = tmp_path / "p"
        result = runner.invoke(main, ["generate", "--kind", "blur", "-n", "16", "--out", str(out)])
        assert result.exit_code == 0, result.output
        for name in ("A.mtx", "b.raw", "b.raw.json", "b_true.raw", "x_true.raw", "problem.json"):
            assert (out / name).exists()
        descriptor = json.loads((out / "problem.json").read_text())
        assert descriptor["shape"] == [16, 16]
        assert descriptor["kind"] == "blur"

    def test_deterministic(self, runner, tmp_path):
        for name in ("a", "b"):
            runner.invoke(main, ["generate", "--kind", "tomo_limited", "-n", "16", "--seed", "3",
                                 "--out", str(tmp_path / name)])
        assert (tmp_path / "a" / "b.raw").read_bytes() == (tmp_path / "b" / "b.raw").read_bytes()

    def test_too_small_phantom(self, runner, tmp_path):
        result = runner.invoke(main, ["generate", "-n", "8", "--out", str(tmp_path / "p")])
        assert result.exit_code == EXIT_ERROR


class TestSolve:
    def test_outer_limit_exit_code_and_files(self, runner, problem_dir, tmp_path):
        out = tmp_path / "run"
        result = runner.invoke(main, ["solve", str(problem_dir), "--out", str(out),
                                      "--max-outer", "1", *FAST])
        assert result.exit_code == EXIT_NOT_CONVERGED, result.output
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["stop_reason"] == "max_iterations"
        assert manifest["config"]["lambda_count"] == 12
        assert len(manifest["outer"]) == 1
        for name in manifest["artifacts"].values():
            assert (out / name).exists()
        assert {"final.pgm", "final.raw", "initial.pgm", "history.csv", "solves.csv",
                "lcurve_ell1.csv"} <= {p.name for p in out.iterdir()}
        with open(out / "solves.csv") as f:
            assert len(list(csv.reader(f))) == 1 + 12

    def test_environment_supplies_defaults(self, runner, problem_dir, tmp_path):
        out = tmp_path / "run"
        result = runner.invoke(main, ["solve", str(problem_dir), "--out", str(out), *FAST],
                               env={"EDGEREG_MAX_OUTER": "1"})
        assert result.exit_code == EXIT_NOT_CONVERGED, result.output
        assert json.loads((out / "manifest.json").read_text())["config"]["max_outer"] == 1

    def test_malformed_problem_directory(self, runner, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        result = runner.invoke(main, ["solve", str(empty)])
        assert result.exit_code == EXIT_ERROR

    def test_descriptor_array_is_a_format_error(self, runner, problem_dir):
        (problem_dir / "problem.json").write_text("[1, 2]")
        result = runner.invoke(main, ["solve", str(problem_dir)])
        assert result.exit_code == EXIT_ERROR
        assert not isinstance(result.exception, AttributeError)

    def test_out_of_range_parameter(self, runner, problem_dir):
        result = runner.invoke(main, ["solve", str(problem_dir), "--theta", "2"])
        assert result.exit_code == EXIT_ERROR

    def test_bad_lambda_grid(self, runner, problem_dir):
        result = runner.invoke(main, ["solve", str(problem_dir), "--lambda-grid", "1:2"])
        assert result.exit_code == EXIT_ERROR


class TestSweep:
    def test_parse_cycles(self):
        assert parse_cycles("0,1 2,1;2,2") == [(0, 1), (2, 1), (2, 2)]
        with pytest.raises(ConfigError):
            parse_cycles("2-1")
        with pytest.raises(ConfigError):
            parse_cycles("  ")

    def test_sweep_csv(self, runner, problem_dir, tmp_path):
        out = tmp_path / "sweep"
        result = runner.invoke(main, ["sweep", str(problem_dir), "--cycles", "1,1 2,1",
                                      "--max-outer", "1", "--out", str(out), *FAST])
        assert result.exit_code == 0, result.output
        with open(out / "sweep.csv") as f:
            rows = list(csv.DictReader(f))
        assert [r["cycle"] for r in rows] == ["V(1,1)", "V(2,1)"]
        assert all(r["ell"] == "1" for r in rows)

    def test_invalid_cycle(self, runner, problem_dir):
        result = runner.invoke(main, ["sweep", str(problem_dir), "--cycles", "0,0"])
        assert result.exit_code == EXIT_ERROR


class TestHierarchy:
    def test_json_summary(self, runner, problem_dir, tmp_path):
        out = tmp_path / "h.json"
        result = runner.invoke(main, ["hierarchy", str(problem_dir), "--max-coarse", "60",
                                      "--out", str(out)])
        assert result.exit_code == 0, result.output
        summary = json.loads(out.read_text())
        assert summary["n_levels"] == len(summary["levels"])
        assert summary["levels"][0]["n"] == 256
        assert summary["coarsest_dim"] <= 256


class TestWarmstart:
    def test_comparison(self, runner, problem_dir, tmp_path):
        out = tmp_path / "w.json"
        result = runner.invoke(main, ["warmstart", str(problem_dir), "--max-outer", "1",
                                      "--out", str(out), *FAST])
        assert result.exit_code == 0, result.output
        totals = json.loads(out.read_text())
        assert set(totals) == {"warm", "zero"}
        assert totals["warm"]["outer_iterations"] == 1
        assert totals["zero"]["total_inner_iterations"] > 0
