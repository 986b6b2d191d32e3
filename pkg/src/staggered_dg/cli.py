"""CLI commands for the staggered DG solver."""

import logging
import sys
from collections.abc import Callable
from pathlib import Path
from typing import Any

import click
from dotenv import load_dotenv

from staggered_dg import __version__
from staggered_dg.app import RunResult, create_app
from staggered_dg.exceptions import ConfigError, StaggeredDGError
from staggered_dg.mesh.io import write_step_mesh
from staggered_dg.mesh.primal import CellKind
from staggered_dg.models.config import Command, SolverSettings, parse_config


def _floats(text: str | None, key: str) -> list[float] | None:
    if text is None:
        return None
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise ConfigError(f"expected a comma-separated list of numbers, got '{text}'",
                          key=key) from e


def _ints(text: str | None, key: str) -> list[int] | None:
    if text is None:
        return None
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise ConfigError(f"expected a comma-separated list of integers, got '{text}'",
                          key=key) from e


def run_options(func: Callable[..., Any]) -> Callable[..., Any]:
    """Options shared by every run command."""
    options = [
        click.option("--config", "config_path", type=click.Path(path_type=Path),
                     help="YAML run configuration (flags win)"),
        click.option("--case", help="Case id: ex1, ex2, ex3 or ex4"),
        click.option("--mesh", type=click.Path(path_type=Path), help="Primal mesh file"),
        click.option("--k", type=int, help="Polynomial degree (1-3)"),
        click.option("--ladder", help="Refinement ladder h^-1, comma-separated"),
        click.option("--resolution", type=int, help="h^-1 for single solves and demos"),
        click.option("--epsilon", type=float, help="Effective viscosity"),
        click.option("--alpha", type=float, help="Brinkman drag coefficient"),
        click.option("--kdiff", type=float, help="Diffusion-dispersion coefficient"),
        click.option("--kdarcy", type=float, help="Hydraulic conductivity"),
        click.option("--dt", type=float, help="Time step"),
        click.option("--tfinal", type=float, help="Final time"),
        click.option("--out", type=click.Path(path_type=Path), help="Output directory"),
        click.option("--dump-stride", type=int, help="Field dump stride in steps"),
        click.option("--assert", "assert_checks", is_flag=True, default=None,
                     help="Exit with status 5 when an acceptance check fails"),
        click.option("--times", help="Demo snapshot times, comma-separated"),
        click.option("--seed", type=int, help="Seed of the random conductivity field"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _flags(command: Command, options: dict[str, Any]) -> dict[str, Any]:
    flags: dict[str, Any] = {"command": command.value}
    for key, value in options.items():
        if key in ("config_path", "ladder", "times", "assert_checks") or value is None:
            continue
        flags[key] = value
    flags["ladder"] = _ints(options.get("ladder"), "ladder")
    flags["times"] = _floats(options.get("times"), "times")
    if options.get("assert_checks"):
        flags["assert"] = True
    return flags


def _configure_logging(settings: SolverSettings) -> None:
    logging.basicConfig(
        level=settings.log_level.upper(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )


def _echo_result(result: RunResult) -> None:
    click.echo(f"✅ {result.summary}")
    for name, ok in result.checks.items():
        click.echo(f"   {'✅' if ok else '⚠️ '} {name}")
    for path in result.artifacts:
        click.echo(f"📁 {path}")


def _run(command: Command, options: dict[str, Any]) -> None:
    load_dotenv()
    settings = SolverSettings()
    _configure_logging(settings)
    try:
        config = parse_config(options.get("config_path"), _flags(command, options))
        result = create_app(settings).dispatch(config)
    except StaggeredDGError as e:
        click.echo(f"❌ {e}", err=True)
        sys.exit(e.exit_code)
    _echo_result(result)


@click.group()
@click.version_option(version=__version__)
def main() -> None:
    """Staggered DG solver for coupled Brinkman-Darcy flow and transport."""
    pass


@main.command()
@run_options
def convergence(**options: Any) -> None:
    """Run a manufactured case over a refinement ladder and write the error table."""
    _run(Command.CONVERGENCE, options)


@main.command("solve-flow")
@run_options
def solve_flow(**options: Any) -> None:
    """Solve the coupled flow once and dump the discrete fields."""
    _run(Command.SOLVE_FLOW, options)


@main.command("run-transport")
@run_options
def run_transport(**options: Any) -> None:
    """Solve the flow, then march the transport equation to the final time."""
    _run(Command.RUN_TRANSPORT, options)


@main.command()
@run_options
def demo(**options: Any) -> None:
    """Run the lake-over-aquifer (ex3) or step-interface (ex4) demonstration."""
    _run(Command.DEMO, options)


@main.command("check-mesh")
@run_options
def check_mesh(**options: Any) -> None:
    """Ingest and subdivide a primal mesh, reporting entity counts."""
    _run(Command.CHECK_MESH, options)


@main.command("step-mesh")
@click.argument("path", type=click.Path(path_type=Path))
@click.option("--cells-per-unit", default=4, show_default=True, help="Lattice cells per unit")
@click.option("--triangles", is_flag=True, help="Split every square into two triangles")
def step_mesh(path: Path, cells_per_unit: int, triangles: bool) -> None:
    """Write the step-interface mesh on (0,12)x(0,6) used by ex4."""
    kind = CellKind.TRIANGLE if triangles else CellKind.QUAD
    try:
        written = write_step_mesh(path, cells_per_unit=cells_per_unit, cell_kind=kind)
    except StaggeredDGError as e:
        click.echo(f"❌ {e}", err=True)
        sys.exit(e.exit_code)
    click.echo(f"✅ Wrote step-interface mesh: {written}")


if __name__ == "__main__":
    main()
