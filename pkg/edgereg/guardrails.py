"""Hard bounds on run parameters, checked before any solve starts."""
from __future__ import annotations

import logging

log = logging.getLogger(__name__)

# (lo, hi), inclusive
PARAMETER_BOUNDS = {
    "lambda_hi_exp": (-16.0, 16.0),
    "lambda_lo_exp": (-16.0, 16.0),
    "lambda_count": (2, 1000),
    "q_exponent": (1e-3, 100.0),
    "nu1": (0, 20),
    "nu2": (0, 20),
    "theta": (1e-6, 1.0 - 1e-6),
    "abs_tol": (1e-300, 1e3),
    "max_outer": (1, 1000),
    "max_iter": (1, 10000),
    "max_coarse": (1, 100000),
    "coarsen_stall": (0.05, 1.0),
}

TRIM_MODES = ("never", "after_first", "always")


class Guardrails:
    """Validates a run configuration against :data:`PARAMETER_BOUNDS`."""

    @staticmethod
    def check_value(field: str, value) -> tuple[bool, str]:
        """Returns (ok, reason) for one field."""
        if field in PARAMETER_BOUNDS:
            lo, hi = PARAMETER_BOUNDS[field]
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                return False, f"{field} must be numeric, got {value!r}"
            if isinstance(lo, int) and isinstance(hi, int) and not float(value).is_integer():
                return False, f"{field} must be an integer, got {value}"
            if value != value or value < lo or value > hi:
                return False, f"{field} must be between {lo} and {hi}, got {value}"
        if field == "trim_mode" and str(value) not in TRIM_MODES:
            return False, f"trim_mode must be one of {', '.join(TRIM_MODES)}, got {value!r}"
        return True, "ok"


def validate_run_config(config: dict) -> tuple[bool, list[str]]:
    """Validate a whole configuration dict. Returns (ok, list_of_errors)."""
    errors = []
    for key, value in config.items():
        ok, reason = Guardrails.check_value(key, value)
        if not ok:
            errors.append(reason)

    if config.get("nu1", 1) + config.get("nu2", 1) < 1:
        errors.append("nu1 + nu2 must be >= 1")
    hi, lo = config.get("lambda_hi_exp"), config.get("lambda_lo_exp")
    if isinstance(hi, (int, float)) and isinstance(lo, (int, float)) and hi <= lo:
        errors.append(f"lambda_hi_exp ({hi}) must exceed lambda_lo_exp ({lo})")

    if errors:
        log.debug("Run config rejected: %s", "; ".join(errors))
    return len(errors) == 0, errors
