"""Rich console output."""
from __future__ import annotations

from contextlib import contextmanager

from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

console = Console(stderr=True)


@contextmanager
def spinner(message: str = "Working..."):
    """Context manager that shows a spinner while work is in progress."""
    with console.status(f"[bold cyan]{message}"):
        yield


def print_banner(title: str):
    console.print(Panel(f"[bold cyan]edgereg[/bold cyan] {title}", border_style="cyan"))


def print_problem(descriptor: dict, shape: tuple[int, int], n_rows: int, nnz: int):
    """One-panel summary of a generated or loaded problem."""
    noise = descriptor.get("noise")
    lines = [
        f"[bold]{descriptor.get('kind', 'problem')}[/bold]  image {shape[0]}x{shape[1]}",
        f"A: {n_rows} x {shape[0] * shape[1]}, nnz {nnz}",
    ]
    if noise is not None:
        lines.append(f"noise {100 * noise:.2f}%  seed {descriptor.get('seed')}")
    console.print(Panel("\n".join(lines), title="[bold cyan]Problem[/bold cyan]", border_style="cyan"))


def print_history(reports):
    """Per-outer-iteration table of chosen λ and inner iteration counts."""
    table = Table(title="Outer Iterations", border_style="cyan")
    table.add_column("l", justify="right", width=4)
    table.add_column("window", width=9)
    table.add_column("lambda*", justify="right")
    table.add_column("index", justify="right", width=5)
    table.add_column("its avg", justify="right")
    table.add_column("min", justify="right", width=4)
    table.add_column("max", justify="right", width=4)
    table.add_column("rel. error", justify="right")

    for rec in reports:
        err = "" if rec.rel_error is None else f"{rec.rel_error:.4f}"
        avg = Text(f"{rec.avg_iterations:.2f}", style="red" if rec.n_unconverged else "")
        table.add_row(
            str(rec.ell), f"{rec.window.lo_index}..{rec.window.hi_index}",
            f"{rec.chosen_lambda:.3e}", str(rec.chosen_index), avg,
            str(rec.min_iterations), str(rec.max_iterations), err,
        )

    console.print()
    console.print(table)
    console.print()


def print_hierarchy(summary: dict):
    table = Table(title="AMG Hierarchy", border_style="cyan")
    for col in ("level", "n", "nnz_K", "nnz_A", "nnz_M", "nnz_P"):
        table.add_column(col, justify="right")
    for lvl in summary["levels"]:
        table.add_row(*(str(lvl[c]) for c in ("level", "n", "nnz_K", "nnz_A", "nnz_M", "nnz_P")))
    console.print()
    console.print(table)
    console.print(
        f"  grid complexity {summary['grid_complexity']:.3f}, "
        f"operator complexity {summary['operator_complexity']:.3f}\n"
    )


def print_sweep(rows: list[dict]):
    """Average inner iterations per outer iteration, one column per cycle."""
    cycles = list(dict.fromkeys(r["cycle"] for r in rows))
    ells = sorted({r["ell"] for r in rows})
    lookup = {(r["cycle"], r["ell"]): r["avg_iterations"] for r in rows}

    table = Table(title="Inner Iterations per Cycle", border_style="cyan")
    table.add_column("l", justify="right", width=4)
    for c in cycles:
        table.add_column(c, justify="right")
    for ell in ells:
        cells = [f"{lookup[(c, ell)]:.2f}" if (c, ell) in lookup else "" for c in cycles]
        table.add_row(str(ell), *cells)

    console.print()
    console.print(table)
    console.print()


def print_error(message: str):
    """Display an error message."""
    console.print(f"\n[bold red]Error:[/bold red] {message}\n")


def print_success(message: str):
    """Display a success message."""
    console.print(f"\n[bold green]{message}[/bold green]\n")


def print_info(message: str):
    """Display an info message."""
    console.print(f"\n[cyan]{message}[/cyan]\n")
