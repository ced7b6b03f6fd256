"""Terminal tables for verification results, loss reports and evaluations."""

from __future__ import annotations

from rich.console import Console
from rich.table import Table

from fmapforge.schema import EvalResult, LossReport, SolverParams
from fmapforge.theory.checks import CheckOutcome

console = Console()


def display_verification(outcomes: list[CheckOutcome], out: Console | None = None) -> None:
    """Print one row per check with a coloured pass/fail column.

    Args:
        outcomes: Results of :func:`fmapforge.theory.checks.run_verification`.
        out: Console to print to, the module console if None.
    """
    out = out or console
    if not outcomes:
        out.print("[dim]No checks were run.[/dim]")
        return

    table = Table(title="Map-relation checks")
    table.add_column("Check", style="cyan")
    table.add_column("Instance")
    table.add_column("Metric", style="yellow")
    table.add_column("Value", justify="right")
    table.add_column("Result", justify="center")

    for outcome in outcomes:
        table.add_row(
            outcome.check,
            outcome.instance,
            outcome.metric,
            f"{outcome.value:.3e}",
            "[green]pass[/green]" if outcome.passed else "[red]FAIL[/red]",
        )

    out.print(table)
    failed = sum(not o.passed for o in outcomes)
    colour = "red" if failed else "green"
    out.print(f"\n[bold {colour}]{len(outcomes) - failed}/{len(outcomes)} check(s) passed.[/]")


def display_loss_reports(reports: dict[str, LossReport], out: Console | None = None) -> None:
    """Print the loss terms of one or more labelled reports side by side."""
    out = out or console
    table = Table(title="Unsupervised losses")
    table.add_column("Term", style="cyan")
    for label in reports:
        table.add_column(label, justify="right")

    for term in ("bij", "orth", "couple", "contrast_x", "contrast_y", "total"):
        table.add_row(term, *(f"{getattr(r, term):.6g}" for r in reports.values()))
    out.print(table)


def display_evaluation(result: EvalResult, name: str, out: Console | None = None) -> None:
    """Print mean geodesic error and AUC, errors shown ×100."""
    out = out or console
    table = Table(title=f"Evaluation: {name}")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", justify="right")
    table.add_row("mean geodesic error (×100)", f"{100 * result.mean_error:.3f}")
    table.add_row("AUC", f"{result.auc:.4f}")
    table.add_row("vertices", str(result.per_vertex_error.shape[0]))
    if result.unreachable:
        table.add_row("unreachable", f"[yellow]{result.unreachable}[/yellow]")
    out.print(table)


def display_params(params: SolverParams, out: Console | None = None) -> None:
    """Print the solver parameters."""
    out = out or console
    table = Table(title="Solver parameters", show_header=False)
    table.add_column("Parameter", style="cyan")
    table.add_column("Value", justify="right")
    table.add_row("lambda", f"{params.lambda_:.6g}")
    table.add_row("gamma", f"{params.gamma:.6g}")
    table.add_row("k", str(params.k))
    table.add_row("tau", f"{params.tau:.6g}")
    table.add_row("mask", params.mask_kind.value)
    out.print(table)
