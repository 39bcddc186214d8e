"""Tests for edgereg.config and edgereg.guardrails."""
import pytest

from edgereg.config import RunConfig, env_overrides, load_config, parse_lambda_grid
from edgereg.errors import ConfigError
from edgereg.guardrails import Guardrails, validate_run_config


class TestRunConfig:
    def test_defaults(self):
        c = RunConfig()
        assert (c.lambda_hi_exp, c.lambda_lo_exp, c.lambda_count) == (2.0, -3.0, 30)
        assert c.q_exponent == 2.0
        assert c.cycle_label == "V(2,1)"
        assert c.trim_mode == "after_first"
        assert c.validated() is c

    def test_from_dict_ignores_unknown_keys(self):
        c = RunConfig.from_dict({"theta": 0.5, "colour": "blue"})
        assert c.theta == 0.5

    def test_round_trip_through_dict(self):
        c = RunConfig(nu1=1, nu2=2, warm_start=False)
        assert RunConfig.from_dict(c.to_dict()) == c

    def test_with_overrides_skips_none(self):
        c = RunConfig().with_overrides(theta=None, max_outer=5)
        assert c.theta == 0.25
        assert c.max_outer == 5

    @pytest.mark.parametrize("kwargs", [
        {"theta": 1.5},
        {"nu1": 0, "nu2": 0},
        {"trim_mode": "sometimes"},
        {"lambda_hi_exp": -4.0},
        {"max_outer": 0},
        {"nu1": 1.5},
    ])
    def test_validated_rejects(self, kwargs):
        with pytest.raises(ConfigError):
            RunConfig(**kwargs).validated()


class TestParseLambdaGrid:
    def test_valid(self):
        assert parse_lambda_grid("2:-3:30") == (2.0, -3.0, 30)

    @pytest.mark.parametrize("text", ["2:-3", "a:b:c", "1:0:2.5"])
    def test_invalid(self, text):
        with pytest.raises(ConfigError):
            parse_lambda_grid(text)


class TestEnvironment:
    def test_env_overrides(self):
        env = {"EDGEREG_THETA": "0.5", "EDGEREG_WARM_START": "no", "EDGEREG_NU1": "3",
               "EDGEREG_TRIM_MODE": "never", "EDGEREG_LAMBDA_GRID": "1:-2:12", "OTHER": "x"}
        assert env_overrides(env) == {
            "theta": 0.5, "warm_start": False, "nu1": 3, "trim_mode": "never",
            "lambda_hi_exp": 1.0, "lambda_lo_exp": -2.0, "lambda_count": 12,
        }

    def test_empty_values_ignored(self):
        assert env_overrides({"EDGEREG_THETA": ""}) == {}

    def test_bad_number(self):
        with pytest.raises(ConfigError):
            env_overrides({"EDGEREG_MAX_ITER": "many"})

    def test_process_environment(self, monkeypatch):
        monkeypatch.setenv("EDGEREG_MAX_OUTER", "7")
        assert load_config().max_outer == 7

    def test_dotenv_file_in_working_directory(self, tmp_path):
        (tmp_path / ".env").write_text("EDGEREG_Q=1.5\nEDGEREG_TOL=1e-8\n")
        c = load_config()
        assert c.q_exponent == 1.5
        assert c.abs_tol == 1e-8

    def test_explicit_env_file(self, tmp_path):
        path = tmp_path / "run.env"
        path.write_text("EDGEREG_MAX_COARSE=50\n")
        assert load_config(env_file=path).max_coarse == 50

    def test_process_environment_beats_dotenv(self, monkeypatch, tmp_path):
        (tmp_path / ".env").write_text("EDGEREG_NU2=4\n")
        monkeypatch.setenv("EDGEREG_NU2", "2")
        assert load_config().nu2 == 2

    def test_overrides_beat_environment(self, monkeypatch):
        monkeypatch.setenv("EDGEREG_THETA", "0.5")
        assert load_config(theta=0.1).theta == 0.1

    def test_invalid_environment_rejected(self, monkeypatch):
        monkeypatch.setenv("EDGEREG_COARSEN_STALL", "2.0")
        with pytest.raises(ConfigError):
            load_config()


class TestGuardrails:
    def test_in_bounds(self):
        assert Guardrails.check_value("theta", 0.25) == (True, "ok")

    def test_unknown_field_passes(self):
        assert Guardrails.check_value("seed", 99)[0]

    def test_bool_is_not_numeric(self):
        ok, reason = Guardrails.check_value("max_iter", True)
        assert not ok
        assert "numeric" in reason

    def test_nan_rejected(self):
        assert not Guardrails.check_value("abs_tol", float("nan"))[0]

    def test_collects_all_errors(self):
        ok, errors = validate_run_config({"theta": 0.0, "nu1": 0, "nu2": 0, "trim_mode": "x"})
        assert not ok
        assert len(errors) == 3
