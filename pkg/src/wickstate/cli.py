from __future__ import annotations

from pathlib import Path
from typing import Optional

import typer
from rich.console import Console
from rich.table import Table

from .api import run_scenario, write_report
from .core.config import get_config
from .core.exceptions import CheckNotFoundError, ScenarioError, StageError
from .core.registry import describe_check, list_checks, list_scenarios, resolve_scenario


console = Console()
app = typer.Typer(add_completion=False, no_args_is_help=True)

EXIT_FAILED_CHECKS = 1
EXIT_SCENARIO = 2
EXIT_STAGE = 3


@app.command()
def version() -> None:
	from . import __version__

	console.print(f"wickstate {__version__}")


@app.command()
def show_config() -> None:
	cfg = get_config()
	console.print_json(data=cfg.model_dump(mode="json"))


@app.command("list-scenarios")
def list_scenarios_cmd() -> None:
	"""List the bundled scenarios."""
	table = Table(show_header=True, header_style="bold magenta")
	table.add_column("Name")
	table.add_column("dim")
	table.add_column("n")
	table.add_column("Metric")
	for name in list_scenarios():
		sc = resolve_scenario(name)
		table.add_row(name, str(sc.dim), str(sc.n_per_axis), sc.metric.preset)
	console.print(table)


@app.command("list-checks")
def list_checks_cmd(stage: Optional[str] = None) -> None:
	"""List catalogued checks, optionally for one stage."""
	table = Table(show_header=True, header_style="bold magenta")
	table.add_column("Check")
	table.add_column("Stage")
	table.add_column("Tolerance")
	table.add_column("Anchor")
	for info in list_checks(stage):
		name = f"{info.name} (info)" if info.informational else info.name
		table.add_row(name, info.stage, f"{info.tolerance:g}", info.anchor)
	console.print(table)


@app.command("describe-check")
def describe_check_cmd(name: str) -> None:
	"""Show the anchor and the tolerance rationale of a check."""
	try:
		info = describe_check(name)
	except CheckNotFoundError as e:
		console.print(f"[red]Error: {e}[/red]")
		raise typer.Exit(EXIT_SCENARIO)
	console.print(f"[bold]Check:[/bold] {info.name}")
	console.print(f"[bold]Stage:[/bold] {info.stage}")
	console.print(f"[bold]Anchor:[/bold] {info.anchor}")
	direction = ">= -tolerance" if info.lower else "<= tolerance"
	console.print(f"[bold]Tolerance:[/bold] {info.tolerance:g} (measured {direction})")
	console.print(f"[bold]Rationale:[/bold] {info.rationale}")
	if info.informational:
		console.print("[yellow]Informational: never fails a run[/yellow]")


@app.command()
def run(
	scenario: str = typer.Argument(..., help="Bundled scenario name or scenario file (JSON/YAML)"),
	out: Optional[Path] = typer.Option(None, "--out", help="Report directory"),
	checks: Optional[str] = typer.Option(None, "--checks", help="Comma-separated check names to report"),
	seed: Optional[int] = typer.Option(None, "--seed", help="Override the scenario seed"),
	quiet: bool = typer.Option(False, "--quiet", help="Warnings only, no progress bars or table"),
	jobs: Optional[int] = typer.Option(None, "--jobs", help="Worker threads for per-bundle work"),
	fmt: str = typer.Option("json", "--format", help="Report format: json or yaml"),
) -> None:
	"""
	Run a scenario through all stages and write the report.

	Exit codes: 0 all checks pass, 1 some check failed, 2 scenario or option error,
	3 numerical failure in a stage.
	"""
	from .core.logging import get_logger, setup_logging

	cfg = get_config()
	if quiet:
		setup_logging(level="WARNING", log_file=cfg.log_file)
	logger = get_logger(__name__)

	if fmt not in ("json", "yaml"):
		console.print(f"[red]Error: unsupported format '{fmt}'; use json or yaml[/red]")
		raise typer.Exit(EXIT_SCENARIO)
	names = [c.strip() for c in checks.split(",") if c.strip()] if checks else None

	try:
		result = run_scenario(
			scenario,
			checks=names,
			seed=seed,
			jobs=jobs,
			show_progress=False if quiet else None,
			raise_on_error=False,
		)
	except (ScenarioError, CheckNotFoundError) as e:
		console.print(f"[red]Error: {e}[/red]")
		raise typer.Exit(EXIT_SCENARIO)

	out_dir = out or cfg.output_dir / result.report.scenario["name"]
	try:
		written = write_report(result, out_dir, fmt)  # type: ignore[arg-type]
	except ValueError as e:
		console.print(f"[red]Error: {e}[/red]")
		raise typer.Exit(EXIT_SCENARIO)
	except OSError as e:
		logger.error(f"Cannot write report to {out_dir}: {e}", exc_info=True)
		console.print(f"[red]Error: cannot write report to {out_dir}: {e}[/red]")
		raise typer.Exit(EXIT_STAGE)

	report = result.report
	if not quiet:
		table = Table(show_header=True, header_style="bold magenta")
		table.add_column("Check")
		table.add_column("Measured")
		table.add_column("Tolerance")
		table.add_column("Result")
		for rec in report.checks:
			if rec.passed:
				status = "[green]pass[/green]"
			elif rec.informational:
				status = "[yellow]info[/yellow]"
			else:
				status = "[red]FAIL[/red]"
			table.add_row(rec.name, f"{rec.measured:.3e}", f"{rec.tolerance:g}", status)
		console.print(table)
	console.print(f"Report written to {written[0]}")

	if result.error is not None:
		err: StageError = result.error
		console.print(f"[red]Error: {err}[/red]")
		raise typer.Exit(EXIT_STAGE)
	if not report.passed:
		failed = ", ".join(c.name for c in report.failed_checks)
		console.print(f"[red]{len(report.failed_checks)} checks failed: {failed}[/red]")
		raise typer.Exit(EXIT_FAILED_CHECKS)
	console.print(f"[green]All {len(report.checks)} checks passed[/green]")
