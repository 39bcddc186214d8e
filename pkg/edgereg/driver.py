"""Outer reweighting loop: AMG setup, warm-started λ sweep, corner, weight update."""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np

from edgereg import amg, lcurve
from edgereg.config import RunConfig
from edgereg.krylov import SolveReport, fgmres
from edgereg.lcurve import LCurveData, TrimWindow
from edgereg.operators import (
    RegularizedSystem,
    WeightState,
    build_gradient,
    update_weights,
    weighted_gradient_of,
)
from edgereg.sparse import DenseVector, Operator

log = logging.getLogger(__name__)

STOP_RUN_LENGTH = 3

HISTORY_CSV_HEADER = [
    "ell", "chosen_lambda", "chosen_index", "rel_error",
    "avg_iterations", "min_iterations", "max_iterations", "wall_time",
]


class StopReason(str, Enum):
    THREE_EQUAL = "three_equal"
    MAX_ITERATIONS = "max_iterations"


class TrimMode(str, Enum):
    NEVER = "never"
    AFTER_FIRST = "after_first"
    ALWAYS = "always"


class StartSource(str, Enum):
    ZERO = "zero"
    PREVIOUS_OUTER = "previous_outer"
    ADJACENT = "adjacent"


@dataclass
class InnerRecord:
    index: int           # 1-based grid index
    lam: float
    report: SolveReport
    x0_source: StartSource

    @property
    def iterations(self) -> int:
        return self.report.iterations

    @property
    def converged(self) -> bool:
        return self.report.converged


@dataclass
class OuterRecord:
    ell: int
    window: TrimWindow
    chosen_index: int
    chosen_lambda: float
    inner: list[InnerRecord]
    lcurve: LCurveData
    rel_error: float | None = None
    wall_time: float = 0.0
    setup_time: float = 0.0

    @property
    def iteration_counts(self) -> list[int]:
        return [r.iterations for r in self.inner]

    @property
    def min_iterations(self) -> int:
        return min(self.iteration_counts)

    @property
    def max_iterations(self) -> int:
        return max(self.iteration_counts)

    @property
    def avg_iterations(self) -> float:
        return float(np.mean(self.iteration_counts))

    @property
    def total_iterations(self) -> int:
        return sum(self.iteration_counts)

    @property
    def n_unconverged(self) -> int:
        return sum(1 for r in self.inner if not r.converged)

    def summary(self) -> dict:
        return {
            "ell": self.ell,
            "window": [self.window.lo_index, self.window.hi_index],
            "chosen_index": self.chosen_index,
            "chosen_lambda": self.chosen_lambda,
            "rel_error": self.rel_error,
            "min_iterations": self.min_iterations,
            "avg_iterations": self.avg_iterations,
            "max_iterations": self.max_iterations,
            "unconverged_solves": self.n_unconverged,
            "wall_time": self.wall_time,
        }

    def history_row(self) -> list:
        return [
            self.ell, repr(self.chosen_lambda), self.chosen_index,
            "" if self.rel_error is None else repr(self.rel_error),
            f"{self.avg_iterations:.4f}", self.min_iterations, self.max_iterations,
            f"{self.wall_time:.3f}",
        ]


@dataclass
class OuterState:
    weight_state: WeightState
    current_solution: DenseVector
    ell: int = 0
    chosen_indices: list[int] = field(default_factory=list)
    chosen_lambdas: list[float] = field(default_factory=list)
    stopped: bool = False
    stop_reason: StopReason | None = None

    def record_choice(self, index: int, lam: float, x: DenseVector) -> None:
        self.chosen_indices.append(index)
        self.chosen_lambdas.append(lam)
        self.current_solution = x

    def repeated_choice(self) -> bool:
        """The last three chosen grid indices agree."""
        tail = self.chosen_indices[-STOP_RUN_LENGTH:]
        return len(tail) == STOP_RUN_LENGTH and len(set(tail)) == 1

    def stop(self, reason: StopReason) -> None:
        self.stopped = True
        self.stop_reason = reason


@dataclass
class DriverHooks:
    """Optional instrumentation callbacks.

    ``on_setup(ell, hierarchy)`` fires once per AMG setup and
    ``on_solve(ell, index, x0, x)`` after every inner solve.
    """

    on_setup: Callable | None = None
    on_solve: Callable | None = None


@dataclass
class RunResult:
    image: DenseVector
    state: OuterState
    reports: list[OuterRecord]
    lambdas: np.ndarray
    initial_image: DenseVector | None = None

    @property
    def stop_reason(self) -> StopReason:
        return self.state.stop_reason

    @property
    def total_inner_iterations(self) -> int:
        return sum(r.total_iterations for r in self.reports)


def write_history_csv(path: str | Path, reports: list[OuterRecord]) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(HISTORY_CSV_HEADER)
        for rec in reports:
            writer.writerow(rec.history_row())
    return path


def active_window(mode: TrimMode, ell: int, prev_index: int | None, m: int) -> TrimWindow:
    """λ index window solved at outer iteration ``ell``."""
    if mode is TrimMode.NEVER or m < lcurve.WINDOW_WIDTH:
        return TrimWindow.full(m)
    if ell == 1:
        return lcurve.trim_window(1, m) if mode is TrimMode.ALWAYS else TrimWindow.full(m)
    return lcurve.trim_window(prev_index, m)


def run(problem, config: RunConfig | None = None, hooks: DriverHooks | None = None) -> RunResult:
    """Edge-preserving reconstruction of ``problem`` (needs A, b, shape; x_true optional)."""
    config = (config or RunConfig()).validated()
    hooks = hooks or DriverHooks()
    mode = TrimMode(config.trim_mode)
    lambdas = lcurve.make_lambda_grid(config.lambda_hi_exp, config.lambda_lo_exp, config.lambda_count)
    m = lambdas.size
    if mode is not TrimMode.NEVER and m < lcurve.WINDOW_WIDTH:
        log.warning("Grid has %d values (< %d); trimming disabled", m, lcurve.WINDOW_WIDTH)

    n_v, n_h = problem.shape
    gradient = build_gradient(n_v, n_h)
    forward = Operator.of(problem.A)
    n = forward.shape[1]
    x_true = getattr(problem, "x_true", None)
    state = OuterState(
        weight_state=WeightState.initial(gradient.n_edges, config.q_exponent),
        current_solution=np.zeros(n),
    )
    reports: list[OuterRecord] = []
    initial_image = None

    for ell in range(1, config.max_outer + 1):
        started = time.perf_counter()
        state.ell = ell
        prev_index = state.chosen_indices[-1] if state.chosen_indices else None
        window = active_window(mode, ell, prev_index, m)

        system = RegularizedSystem.build(forward, gradient, state.weight_state, lambdas[-1], problem.b)
        hierarchy = amg.setup_hierarchy(
            forward.matrix, system.weighted_gradient.matrix,
            theta=config.theta, max_coarse=config.max_coarse, coarsen_stall=config.coarsen_stall,
        )
        setup_time = time.perf_counter() - started
        if hooks.on_setup:
            hooks.on_setup(ell, hierarchy)
        rhs = system.normal_rhs()

        solutions: dict[int, DenseVector] = {}
        inner: list[InnerRecord] = []
        resid, constraint = [], []
        x_prev = None
        for pos in reversed(window.positions()):
            index = pos + 1
            lam = float(lambdas[pos])
            if not config.warm_start or (x_prev is None and ell == 1):
                x0, source = np.zeros(n), StartSource.ZERO
            elif x_prev is None:
                x0, source = state.current_solution.copy(), StartSource.PREVIOUS_OUTER
            else:
                x0, source = x_prev.copy(), StartSource.ADJACENT

            sys_lam = system.with_lambda(lam)
            x, report = fgmres(
                sys_lam.normal_apply, hierarchy.preconditioner(lam, config.nu1, config.nu2),
                rhs, x0=x0, abs_tol=config.abs_tol, max_iter=config.max_iter,
            )
            if not report.converged:
                log.warning("l=%d lambda=%.3e: FGMRES stopped at residual %.3e after %d iterations",
                            ell, lam, report.final_residual_norm, report.iterations)
            log.debug("l=%d lambda[%d]=%.3e: %d iterations (start: %s)",
                      ell, index, lam, report.iterations, source.value)
            if hooks.on_solve:
                hooks.on_solve(ell, index, x0, x)

            solutions[index] = x
            inner.append(InnerRecord(index=index, lam=lam, report=report, x0_source=source))
            r_norm, c_norm = sys_lam.residual_norms(x)
            resid.append(r_norm)
            constraint.append(c_norm)
            x_prev = x

        indices = [rec.index for rec in inner]
        curve = LCurveData.from_norms([rec.lam for rec in inner], resid, constraint, indices)
        corner = lcurve.find_corner(curve)
        chosen_index = curve.points[corner].grid_index
        chosen_lambda = float(lambdas[chosen_index - 1])
        x_star = solutions[chosen_index]
        state.record_choice(chosen_index, chosen_lambda, x_star)
        if ell == 1:
            initial_image = x_star

        record = OuterRecord(
            ell=ell, window=window, chosen_index=chosen_index, chosen_lambda=chosen_lambda,
            inner=inner, lcurve=curve,
            rel_error=(float(np.linalg.norm(x_star - x_true) / np.linalg.norm(x_true))
                       if x_true is not None else None),
            setup_time=setup_time,
        )
        record.wall_time = time.perf_counter() - started
        reports.append(record)
        log.info("l=%d: lambda*=%.3e (index %d), iterations avg %.1f [%d..%d]%s",
                 ell, chosen_lambda, chosen_index, record.avg_iterations,
                 record.min_iterations, record.max_iterations,
                 f", rel. error {record.rel_error:.4f}" if record.rel_error is not None else "")

        if state.repeated_choice():
            state.stop(StopReason.THREE_EQUAL)
            break
        if ell < config.max_outer:
            state.weight_state = update_weights(
                state.weight_state, weighted_gradient_of(state.weight_state, gradient, x_star)
            )

    if not state.stopped:
        state.stop(StopReason.MAX_ITERATIONS)
    log.info("Stopped after %d outer iterations (%s)", state.ell, state.stop_reason.value)
    return RunResult(image=state.current_solution, state=state, reports=reports,
                     lambdas=lambdas, initial_image=initial_image)
