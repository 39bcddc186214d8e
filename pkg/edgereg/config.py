"""Run configuration via dataclass + .env loading."""
from __future__ import annotations

import logging
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from dotenv import load_dotenv

from edgereg.errors import ConfigError
from edgereg.guardrails import validate_run_config

log = logging.getLogger(__name__)

ENV_PREFIX = "EDGEREG_"

# Environment variable suffix -> RunConfig field
ENV_FIELDS = {
    "Q": "q_exponent",
    "THETA": "theta",
    "TOL": "abs_tol",
    "MAX_OUTER": "max_outer",
    "MAX_ITER": "max_iter",
    "TRIM_MODE": "trim_mode",
    "NU1": "nu1",
    "NU2": "nu2",
    "MAX_COARSE": "max_coarse",
    "COARSEN_STALL": "coarsen_stall",
    "WARM_START": "warm_start",
    "LAMBDA_GRID": "lambda_grid",
    "SEED": "seed",
}


@dataclass
class RunConfig:
    lambda_hi_exp: float = 2.0
    lambda_lo_exp: float = -3.0
    lambda_count: int = 30
    q_exponent: float = 2.0
    nu1: int = 2
    nu2: int = 1
    theta: float = 0.25
    abs_tol: float = 1e-6
    max_outer: int = 30
    trim_mode: str = "after_first"  # "never", "after_first" or "always"
    max_iter: int = 300
    max_coarse: int = 200
    coarsen_stall: float = 0.9
    warm_start: bool = True
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})

    def with_overrides(self, **overrides) -> RunConfig:
        """Copy with the non-None overrides applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def validated(self) -> RunConfig:
        ok, errors = validate_run_config(self.to_dict())
        if not ok:
            raise ConfigError("invalid run configuration: " + "; ".join(errors))
        return self

    @property
    def cycle_label(self) -> str:
        return f"V({self.nu1},{self.nu2})"


def parse_lambda_grid(text: str) -> tuple[float, float, int]:
    """Parse ``hi:lo:count`` (exponents of 10) into its three fields."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"lambda grid must look like hi:lo:count, got {text!r}")
    try:
        return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as e:
        raise ConfigError(f"bad lambda grid {text!r}: {e}") from e


def _coerce(name: str, raw: str):
    if name == "lambda_grid":
        return parse_lambda_grid(raw)
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    try:
        if kind == "bool":
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError as e:
        raise ConfigError(f"{ENV_PREFIX}{name.upper()}={raw!r}: {e}") from e
    return raw.strip()


def env_overrides(environ=None) -> dict:
    """RunConfig field values taken from ``EDGEREG_*`` variables."""
    environ = os.environ if environ is None else environ
    out: dict = {}
    for suffix, name in ENV_FIELDS.items():
        raw = environ.get(ENV_PREFIX + suffix)
        if raw is None or raw == "":
            continue
        value = _coerce(name, raw)
        if name == "lambda_grid":
            out["lambda_hi_exp"], out["lambda_lo_exp"], out["lambda_count"] = value
        else:
            out[name] = value
    return out


def load_config(env_file: str | Path | None = None, **overrides) -> RunConfig:
    """Defaults, then ``.env`` / environment, then explicit overrides."""
    path = Path(env_file) if env_file is not None else Path.cwd() / ".env"
    if path.exists():
        load_dotenv(path, override=False)
        log.debug("Loaded environment from %s", path)
    config = RunConfig().with_overrides(**env_overrides())
    return config.with_overrides(**overrides).validated()
