"""Command registry and dispatch for batch runs."""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from staggered_dg.exceptions import AcceptanceError, ConfigError
from staggered_dg.flow import FlowSolution, build_flow_spaces, solve_flow, verify_conservation
from staggered_dg.harness.cases import MANUFACTURED_CASES, ManufacturedCase, build_case
from staggered_dg.harness.convergence import order_checks, run_convergence
from staggered_dg.harness.demos import DEMO_SETUPS, run_demo
from staggered_dg.harness.norms import flow_errors, transport_errors
from staggered_dg.mesh.io import ingest_primal
from staggered_dg.mesh.staggered import EdgeKind, StaggeredMesh, subdivide
from staggered_dg.models.config import Command, RunConfig, SolverSettings
from staggered_dg.models.params import BoundaryData
from staggered_dg.models.reports import ErrorReport
from staggered_dg.output.dumps import (
    flow_fields,
    transport_fields,
    write_field_dump,
    write_nodal_csv,
)
from staggered_dg.output.reports import (
    stability_summary,
    write_error_report,
    write_stability_report,
    write_summary,
)
from staggered_dg.transport import build_transport_spaces, run_transport
from staggered_dg.worker import run_ladder

logger = logging.getLogger(__name__)

LEDGER_TOL = 1e-8
ENERGY_TOL = 1e-10


@dataclass
class RunResult:
    """Artifacts, a one-line summary and named acceptance checks of a run."""

    command: Command
    summary: str
    artifacts: list[Path] = field(default_factory=list)
    checks: dict[str, bool] = field(default_factory=dict)

    @property
    def failed(self) -> list[str]:
        return [name for name, ok in self.checks.items() if not ok]


Handler = Callable[[RunConfig, SolverSettings], RunResult]


class SolverApp:
    """Maps commands to handlers and enforces acceptance checks on request."""

    def __init__(self, settings: SolverSettings | None = None) -> None:
        """Initialize application."""
        self.settings = settings or SolverSettings()
        self.handlers: dict[Command, Handler] = {}

    def command(self, name: Command) -> Callable[[Handler], Handler]:
        """Decorator to register the handler of a command."""

        def register(func: Handler) -> Handler:
            self.handlers[name] = func
            return func

        return register

    def dispatch(self, config: RunConfig) -> RunResult:
        """Run one validated configuration; raises AcceptanceError for failed checks under
        ``assert``."""
        handler = self.handlers.get(config.command)
        if handler is None:
            raise ConfigError(f"no handler for '{config.command.value}'", key="command")
        logger.info(f"Dispatching {config.command.value} (case={config.case})")
        result = handler(config, self.settings)
        for name, ok in result.checks.items():
            if not ok:
                logger.warning(f"Acceptance check failed: {name}")
        if config.assert_checks and result.failed:
            raise AcceptanceError(f"failed checks: {', '.join(result.failed)}")
        return result


def _manufactured(config: RunConfig) -> ManufacturedCase:
    if config.case not in MANUFACTURED_CASES:
        raise ConfigError(
            f"'{config.command.value}' needs a manufactured case "
            f"({', '.join(MANUFACTURED_CASES)}), got '{config.case}'",
            key="case",
        )
    return build_case(
        config.case,
        epsilon=config.value("epsilon", 1.0),
        alpha=config.value("alpha", 1.0),
        k_darcy=config.value("kdarcy", 1.0),
        k_diff=config.value("kdiff", 1.0),
    )


def _format(values: dict[str, float]) -> str:
    return ", ".join(f"{name}={value:.3e}" for name, value in values.items())


def run_convergence_command(config: RunConfig, settings: SolverSettings) -> RunResult:
    case = _manufactured(config)
    dt, t_final = config.time_grid(1e-3, 0.1)
    path = config.out / f"{case.case_id}_k{config.k}_convergence.csv"

    def write_partial(report: ErrorReport) -> None:
        write_error_report(report, path)

    if settings.ladder_workers > 1:
        report = run_ladder(case, config.ladder, config.k, dt, t_final, settings, write_partial)
    else:
        report = run_convergence(case, config.ladder, config.k, dt, t_final, settings,
                                 write_partial)
    write_error_report(report, path)

    checks = {
        "conservation": all(
            row.conservation is not None and row.conservation.passes(settings.conservation_tol)
            for row in report.rows
        )
    }
    skip = ("z",) if case.k_diff < 1.0 else ()
    checks.update(order_checks(report, skip=skip))
    finest = report.rows[-1]
    return RunResult(
        command=config.command,
        summary=f"{case.case_id}: {len(report.rows)} levels, finest h={finest.h:.4g}: "
        + _format(finest.errors),
        artifacts=[path],
        checks=checks,
    )


@dataclass
class _FlowRun:
    case: ManufacturedCase | None
    mesh: StaggeredMesh
    bdata: BoundaryData
    flow: FlowSolution


def _solve(config: RunConfig, settings: SolverSettings) -> _FlowRun:
    if config.case in DEMO_SETUPS:
        setup = DEMO_SETUPS[config.case](config)
        case, mesh, params, bdata = None, setup.mesh, setup.flow_params, setup.bdata
        full_velocity = setup.full_velocity
    else:
        case = _manufactured(config)
        mesh = subdivide(case.primal(config.resolution))
        params, bdata, full_velocity = case.flow_params(), case.boundary_data(), False
    spaces = build_flow_spaces(mesh, config.k, brinkman_velocity_mode=full_velocity,
                               cond_max=settings.unisolvence_cond_max)
    flow = solve_flow(mesh, spaces, params, bdata, settings)
    return _FlowRun(case=case, mesh=mesh, bdata=bdata, flow=flow)


def solve_flow_command(config: RunConfig, settings: SolverSettings) -> RunResult:
    solved = _solve(config, settings)
    conservation = verify_conservation(solved.flow, settings.data_quadrature_exactness)
    stem = config.out / f"{config.case}_flow"
    fields = flow_fields(solved.flow)
    artifacts = [
        write_field_dump(stem.with_suffix(".dump"), solved.mesh, fields, config.k),
        write_nodal_csv(stem.with_suffix(".csv"), solved.mesh, fields, config.k),
    ]
    summary: dict[str, Any] = {
        "case": config.case,
        "conservation": conservation.model_dump(),
        "residual": float(solved.flow.residual),
    }
    line = f"{config.case}: conservation residual {conservation.worst():.3e}"
    if solved.case is not None:
        errors = flow_errors(solved.case, solved.flow, settings.error_exactness(config.k))
        summary["errors"] = errors
        line += ", " + _format(errors)
    artifacts.append(write_summary(summary, config.out / f"{config.case}_flow_summary.yaml"))
    return RunResult(
        command=config.command,
        summary=line,
        artifacts=artifacts,
        checks={"conservation": conservation.passes(settings.conservation_tol)},
    )


def run_transport_command(config: RunConfig, settings: SolverSettings) -> RunResult:
    if config.case in DEMO_SETUPS:
        return demo_command(config, settings)
    solved = _solve(config, settings)
    case, mesh = solved.case, solved.mesh
    assert case is not None
    dt, t_final = config.time_grid(1e-3, 0.1)
    spaces = build_transport_spaces(mesh, config.k, settings.unisolvence_cond_max)
    stride = config.dump_stride
    run = run_transport(
        mesh, spaces, case.transport_params(dt, t_final), solved.flow, solved.bdata, settings,
        keep=lambda state: bool(stride) and state.n % stride == 0,
    )
    artifacts = [write_stability_report(run.report, config.out / f"{case.case_id}_stability.csv")]
    for state in [*run.states, run.final]:
        path = config.out / f"{case.case_id}_c_{state.n:07d}.dump"
        if path not in artifacts:
            artifacts.append(write_field_dump(path, mesh, transport_fields(spaces, state),
                                              config.k, t=state.t))
    errors = transport_errors(case, run.final, spaces, settings.error_exactness(config.k))
    summary = stability_summary(run.report)
    summary.update({"case": case.case_id, "errors": errors})
    artifacts.append(write_summary(summary, config.out / f"{case.case_id}_transport_summary.yaml"))
    return RunResult(
        command=config.command,
        summary=f"{case.case_id}: {len(run.report.records)} steps, stability ratio "
        f"{run.report.ratio:.3e}, " + _format(errors),
        artifacts=artifacts,
        checks=_transport_checks(run.report.max_ledger(), run.report.max_energy_residual()),
    )


def _transport_checks(ledger: float, energy: float) -> dict[str, bool]:
    return {"mass_ledger": ledger <= LEDGER_TOL, "energy_identity": energy <= ENERGY_TOL}


def demo_command(config: RunConfig, settings: SolverSettings) -> RunResult:
    assert config.case is not None
    result = run_demo(config.case, config, settings, out=config.out)
    report = result.run.report
    checks = _transport_checks(report.max_ledger(), report.max_energy_residual())
    checks["snapshots"] = all(
        any(abs(s.state.t - t) < 0.5 * result.setup.transport_params.dt for s in result.snapshots)
        for t in result.setup.times
        if t <= result.setup.transport_params.t_final
    )
    if config.case == "ex3":
        xs = [s.centroid[0] for s in result.snapshots if not math.isnan(s.centroid[0])]
        checks["rightward_drift"] = bool(np.all(np.diff(xs) >= -1e-12))
    return RunResult(
        command=config.command,
        summary=f"{config.case}: {len(result.snapshots)} snapshots, stability ratio "
        f"{report.ratio:.3e}, max ledger {report.max_ledger():.1e}",
        artifacts=result.artifacts,
        checks=checks,
    )


def check_mesh_command(config: RunConfig, settings: SolverSettings) -> RunResult:
    assert config.mesh is not None
    primal = ingest_primal(config.mesh)
    mesh = subdivide(primal)
    line = (
        f"{config.mesh}: {primal.n_cells} cells, {primal.n_vertices} vertices, "
        f"{primal.count_edges()} edges, {len(primal.interface_edges())} interface edges; "
        f"{mesh.n_tris} subtriangles, {len(mesh.edges_of(EdgeKind.DUAL))} dual edges"
    )
    return RunResult(command=config.command, summary=line)


def create_app(settings: SolverSettings | None = None) -> SolverApp:
    """Application with every built-in command registered."""
    app = SolverApp(settings)
    app.command(Command.CONVERGENCE)(run_convergence_command)
    app.command(Command.SOLVE_FLOW)(solve_flow_command)
    app.command(Command.RUN_TRANSPORT)(run_transport_command)
    app.command(Command.DEMO)(demo_command)
    app.command(Command.CHECK_MESH)(check_mesh_command)
    return app
