"""Click subcommands: generate, solve, sweep, hierarchy, warmstart."""

import csv
import functools
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime
from pathlib import Path

import click
from rich.logging import RichHandler

from edgereg import amg, artifacts
from edgereg.config import RunConfig, load_config, parse_lambda_grid
from edgereg.display import (
    console,
    print_banner,
    print_error,
    print_hierarchy,
    print_history,
    print_info,
    print_problem,
    print_success,
    print_sweep,
    spinner,
)
from edgereg.driver import StopReason, run, write_history_csv
from edgereg.errors import ConfigError, EdgeRegError
from edgereg.krylov import write_solve_reports_csv
from edgereg.lcurve import write_lcurve_csv
from edgereg.operators import WeightState, build_gradient
from edgereg.problems import PROBLEM_KINDS, build_problem

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2
EXIT_INTERRUPTED = 130

DEFAULT_CYCLES = "0,1 1,1 1,2 2,1 2,2"
SWEEP_CSV_HEADER = ["cycle", "ell", "avg_iterations", "min_iterations", "max_iterations"]


def _handle_errors(f):
    """Decorator mapping library and I/O errors to exit codes."""
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except KeyboardInterrupt:
            console.print("\n[cyan]Interrupted.[/cyan]")
            sys.exit(EXIT_INTERRUPTED)
        except EdgeRegError as e:
            print_error(str(e))
            sys.exit(EXIT_ERROR)
        except OSError as e:
            print_error(f"I/O error: {e}")
            sys.exit(EXIT_ERROR)
    return wrapper


def _run_options(f):
    """Solver options shared by solve, sweep and warmstart; unset means config default."""
    options = [
        click.option("--q", "q_exponent", type=float, help="Edge-weight exponent (default 2)"),
        click.option("--theta", type=float, help="AMG strength threshold (default 0.25)"),
        click.option("--nu1", type=int, help="Pre-relaxation sweeps (default 2)"),
        click.option("--nu2", type=int, help="Post-relaxation sweeps (default 1)"),
        click.option("--tol", "abs_tol", type=float, help="Absolute normal-residual tolerance (default 1e-6)"),
        click.option("--max-outer", type=int, help="Maximum outer iterations (default 30)"),
        click.option("--max-iter", type=int, help="FGMRES iteration cap (default 300)"),
        click.option("--trim-mode", type=click.Choice(["never", "after_first", "always"]),
                     help="Lambda window trimming (default after_first)"),
        click.option("--lambda-grid", help="Lambda grid as hi:lo:count exponents (default 2:-3:30)"),
        click.option("--warm-start/--no-warm-start", default=None,
                     help="Warm-start inner solves (default on)"),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _config_from(opts: dict) -> RunConfig:
    grid = opts.pop("lambda_grid", None)
    if grid:
        opts["lambda_hi_exp"], opts["lambda_lo_exp"], opts["lambda_count"] = parse_lambda_grid(grid)
    return load_config(**opts)


def _default_run_dir(problem_dir: Path, prefix: str = "") -> Path:
    return problem_dir / "runs" / f"{prefix}{datetime.now().strftime('%Y%m%d-%H%M%S')}"


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging")
@click.option("--quiet", is_flag=True, help="Warnings and errors only")
def main(verbose, quiet):
    """edgereg: edge-preserving regularized image reconstruction."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level, format="%(message)s", datefmt="[%X]", force=True,
        handlers=[RichHandler(console=console, show_path=False, rich_tracebacks=False)],
    )


@main.command()
@click.option("--kind", type=click.Choice(PROBLEM_KINDS), default="tomo_full", show_default=True)
@click.option("--size", "-n", type=int, default=64, show_default=True, help="Image size n (n x n)")
@click.option("--noise", type=float, default=0.01, show_default=True, help="Relative noise level")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), required=True)
@_handle_errors
def generate(kind, size, noise, seed, out_dir):
    """Generate a test problem directory."""
    print_banner("generate")
    with spinner(f"Building {kind} problem..."):
        problem = build_problem(kind, size, noise=noise, seed=seed)
        artifacts.write_problem(out_dir, problem)
    print_problem(problem.descriptor, problem.shape, problem.A.shape[0], problem.A.nnz)
    print_success(f"Problem written to {out_dir}")


@main.command()
@click.argument("problem_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@_run_options
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path),
              help="Run directory (default PROBLEM_DIR/runs/<timestamp>)")
@_handle_errors
def solve(problem_dir, out_dir, **opts):
    """Run the edge-preserving reconstruction on PROBLEM_DIR."""
    print_banner("solve")
    config = _config_from(opts)
    problem = artifacts.load_problem(problem_dir)
    print_problem(problem.descriptor, problem.shape, problem.A.shape[0], problem.A.nnz)

    result = run(problem, config)
    run_dir = out_dir or _default_run_dir(problem_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    files = artifacts.write_image(run_dir, "final", result.image, problem.shape)
    if result.initial_image is not None:
        files.update(artifacts.write_image(run_dir, "initial", result.initial_image, problem.shape))
    write_history_csv(run_dir / "history.csv", result.reports)
    files["history"] = "history.csv"
    write_solve_reports_csv(
        run_dir / "solves.csv",
        ((rec.ell, inner.lam, inner.report) for rec in result.reports for inner in rec.inner),
    )
    files["solves"] = "solves.csv"
    for rec in result.reports:
        name = f"lcurve_ell{rec.ell}.csv"
        write_lcurve_csv(run_dir / name, rec.lcurve)
        files[f"lcurve_ell{rec.ell}"] = name

    manifest = artifacts.RunManifest(
        config=config.to_dict(),
        problem=problem.descriptor,
        outer=[rec.summary() for rec in result.reports],
        stop_reason=result.stop_reason.value,
        total_inner_iterations=result.total_inner_iterations,
        artifacts=files,
    )
    artifacts.write_manifest(run_dir, manifest)

    print_history(result.reports)
    if result.stop_reason is StopReason.THREE_EQUAL:
        print_success(f"Converged after {result.state.ell} outer iterations; results in {run_dir}")
        sys.exit(EXIT_OK)
    print_info(f"Stopped at the outer iteration limit ({config.max_outer}); results in {run_dir}")
    sys.exit(EXIT_NOT_CONVERGED)


def parse_cycles(text: str) -> list[tuple[int, int]]:
    """``"0,1 2,1"`` -> [(0, 1), (2, 1)]; tokens may also be separated by ';'."""
    cycles = []
    for token in text.replace(";", " ").split():
        try:
            nu1, nu2 = (int(v) for v in token.split(","))
        except ValueError:
            raise ConfigError(f"cycle must look like nu1,nu2, got {token!r}") from None
        cycles.append((nu1, nu2))
    if not cycles:
        raise ConfigError("no cycles given")
    return cycles


def _sweep_one(problem_dir: str, config_dict: dict) -> list[dict]:
    """One driver run for one cycle configuration (process-pool entry point)."""
    config = RunConfig.from_dict(config_dict).validated()
    result = run(artifacts.load_problem(problem_dir), config)
    return [
        {
            "cycle": config.cycle_label,
            "ell": rec.ell,
            "avg_iterations": rec.avg_iterations,
            "min_iterations": rec.min_iterations,
            "max_iterations": rec.max_iterations,
        }
        for rec in result.reports
    ]


def write_sweep_csv(path: Path, rows: list[dict]) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=SWEEP_CSV_HEADER)
        writer.writeheader()
        for row in rows:
            writer.writerow({**row, "avg_iterations": f"{row['avg_iterations']:.4f}"})
    return path


@main.command()
@click.argument("problem_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@_run_options
@click.option("--cycles", default=DEFAULT_CYCLES, show_default=True,
              help="Space-separated nu1,nu2 pairs")
@click.option("--jobs", type=int, default=1, show_default=True, help="Parallel processes")
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path),
              help="Output directory (default PROBLEM_DIR/runs/sweep-<timestamp>)")
@_handle_errors
def sweep(problem_dir, cycles, jobs, out_dir, **opts):
    """Compare V-cycle variants by inner iterations per outer iteration."""
    print_banner("sweep")
    base = _config_from(opts)
    configs = [base.with_overrides(nu1=nu1, nu2=nu2).validated().to_dict()
               for nu1, nu2 in parse_cycles(cycles)]

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_sweep_one, str(problem_dir), c) for c in configs]
            per_cycle = [fut.result() for fut in futures]
    else:
        per_cycle = [_sweep_one(str(problem_dir), c) for c in configs]
    rows = [row for cycle_rows in per_cycle for row in cycle_rows]

    run_dir = out_dir or _default_run_dir(problem_dir, prefix="sweep-")
    run_dir.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(run_dir / "sweep.csv", rows)
    print_sweep(rows)
    print_success(f"Sweep written to {run_dir / 'sweep.csv'}")


@main.command()
@click.argument("problem_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--theta", type=float, help="AMG strength threshold (default 0.25)")
@click.option("--max-coarse", type=int, help="Coarsest-level size limit (default 200)")
@click.option("--out", "out_file", type=click.Path(dir_okay=False, path_type=Path),
              help="Write the hierarchy summary as JSON")
@_handle_errors
def hierarchy(problem_dir, theta, max_coarse, out_file):
    """Show the AMG hierarchy of the first outer iteration."""
    print_banner("hierarchy")
    config = load_config(theta=theta, max_coarse=max_coarse)
    problem = artifacts.load_problem(problem_dir)
    gradient = build_gradient(*problem.shape)
    M = WeightState.initial(gradient.n_edges, config.q_exponent).weighted_gradient(gradient)
    h = amg.setup_hierarchy(problem.A, M, theta=config.theta, max_coarse=config.max_coarse,
                            coarsen_stall=config.coarsen_stall)
    print_hierarchy(h.summary())
    if out_file:
        amg.write_hierarchy_json(out_file, h)
        print_success(f"Hierarchy written to {out_file}")


@main.command()
@click.argument("problem_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@_run_options
@click.option("--out", "out_file", type=click.Path(dir_okay=False, path_type=Path),
              help="Write the comparison as JSON")
@_handle_errors
def warmstart(problem_dir, out_file, **opts):
    """Total inner iterations with and without warm starts."""
    print_banner("warmstart")
    opts.pop("warm_start", None)
    base = _config_from(opts)
    problem = artifacts.load_problem(problem_dir)
    totals = {}
    for label, flag in (("warm", True), ("zero", False)):
        result = run(problem, base.with_overrides(warm_start=flag))
        totals[label] = {
            "total_inner_iterations": result.total_inner_iterations,
            "outer_iterations": result.state.ell,
            "chosen_indices": list(result.state.chosen_indices),
        }
        console.print(f"  [bold]{label:>4}[/bold] start: {result.total_inner_iterations} inner iterations "
                      f"over {result.state.ell} outer iterations")
    if out_file:
        artifacts.write_json(out_file, totals)
        print_success(f"Comparison written to {out_file}")
