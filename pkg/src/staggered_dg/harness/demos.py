"""Surface water/groundwater demonstrations without exact solutions."""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from staggered_dg.exceptions import ConfigError, SolverError
from staggered_dg.fem.assembly import volume_quadrature
from staggered_dg.flow import FlowSolution, build_flow_spaces, solve_flow, verify_conservation
from staggered_dg.mesh.io import ingest_primal
from staggered_dg.mesh.primal import Rectangle, ladder_primal
from staggered_dg.mesh.staggered import StaggeredMesh, subdivide
from staggered_dg.models.config import RunConfig, SolverSettings
from staggered_dg.models.params import BoundaryData, FlowParams, SpaceField, TransportParams
from staggered_dg.models.reports import ConservationReport
from staggered_dg.output.dumps import transport_fields, write_field_dump, write_nodal_csv
from staggered_dg.output.reports import stability_summary, write_stability_report, write_summary
from staggered_dg.transport import (
    TransportRun,
    TransportSpaces,
    TransportState,
    build_transport_spaces,
    run_transport,
)

logger = logging.getLogger(__name__)

DEMO_CASES = ("ex3", "ex4")
EX3_TIMES = (1.0, 3.0, 6.0)
EX4_TIMES = (1.0, 5.0, 10.0, 20.0)
BOUNDARY_TOL = 1e-9


class RandomConductivity:
    """Piecewise-constant scalar field on a lattice of square cells, uniform in [low, high]."""

    def __init__(
        self,
        bounds: Rectangle,
        cell_size: float = 1.0,
        low: float = 1e-6,
        high: float = 1e-3,
        seed: int = 0,
    ) -> None:
        if not 0.0 < low <= high:
            raise ConfigError("conductivity bounds must satisfy 0 < low <= high", key="kdarcy")
        self.bounds = bounds
        self.cell_size = cell_size
        self.nx = max(1, math.ceil(bounds.width / cell_size - 1e-9))
        self.ny = max(1, math.ceil(bounds.height / cell_size - 1e-9))
        self.values = np.random.default_rng(seed).uniform(low, high, (self.ny, self.nx))

    def __call__(self, points: np.ndarray) -> np.ndarray:
        i = np.floor((points[..., 0] - self.bounds.x0) / self.cell_size).astype(np.int64)
        j = np.floor((points[..., 1] - self.bounds.y0) / self.cell_size).astype(np.int64)
        return self.values[np.clip(j, 0, self.ny - 1), np.clip(i, 0, self.nx - 1)]


def disc_indicator(center: tuple[float, float], radius: float) -> SpaceField:
    """1 inside the open disc, 0 elsewhere."""
    cx, cy = center

    def indicator(x: np.ndarray) -> np.ndarray:
        inside = np.hypot(x[..., 0] - cx, x[..., 1] - cy) < radius
        return inside.astype(float)

    return indicator


def _bounds(mesh: StaggeredMesh) -> Rectangle:
    lo, hi = mesh.points.min(axis=0), mesh.points.max(axis=0)
    return Rectangle(x0=float(lo[0]), x1=float(hi[0]), y0=float(lo[1]), y1=float(hi[1]))


@dataclass
class DemoSetup:
    """Mesh, data and snapshot times of one demonstration."""

    case_id: str
    mesh: StaggeredMesh
    k: int
    flow_params: FlowParams
    bdata: BoundaryData
    transport_params: TransportParams
    times: tuple[float, ...]
    full_velocity: bool = False


def ex3_setup(config: RunConfig) -> DemoSetup:
    """Lake over an aquifer: inflow through the left lake wall, pressure at the aquifer bottom."""
    domain_b = Rectangle(x0=0.0, x1=1.0, y0=0.5, y1=1.0)
    domain_d = Rectangle(x0=0.0, x1=1.0, y0=0.0, y1=0.5)
    mesh = subdivide(ladder_primal(domain_b, domain_d, config.resolution))

    def wall_velocity(x: np.ndarray) -> np.ndarray:
        y = x[:, 1]
        inflow = np.where(x[:, 0] < BOUNDARY_TOL, y * (1.5 - y) / 5.0, 0.0)
        return np.column_stack([inflow, np.zeros(len(x))])

    bdata = BoundaryData(
        brinkman_velocity=wall_velocity,
        darcy_pressure=lambda x: np.full(len(x), -0.05),
        darcy_pressure_region=lambda m: m[:, 1] < BOUNDARY_TOL,
        c_in=lambda x, t: np.zeros(len(x)),
    )
    times = tuple(config.times) if config.times else EX3_TIMES
    dt, t_final = config.time_grid(1e-3, max(times))
    return DemoSetup(
        case_id="ex3",
        mesh=mesh,
        k=config.k,
        flow_params=FlowParams(
            epsilon=config.value("epsilon", 0.1),
            alpha=config.value("alpha", 1.0),
            k_darcy=config.value("kdarcy", 1e-2),
        ),
        bdata=bdata,
        transport_params=TransportParams(
            k_diff=config.value("kdiff", 1e-5),
            porosity=1.0,
            c_initial=disc_indicator((0.1, 0.7), 0.1),
            dt=dt,
            t_final=t_final,
        ),
        times=times,
        full_velocity=True,
    )


def ex4_setup(config: RunConfig) -> DemoSetup:
    """Step-shaped interface on (0,12)×(0,6) with a random aquifer conductivity."""
    if config.mesh is None:
        raise ConfigError("ex4 needs an ingested mesh file (--mesh)", key="mesh")
    mesh = subdivide(ingest_primal(config.mesh))
    box = _bounds(mesh)

    def wall_flux(x: np.ndarray, normals: np.ndarray) -> np.ndarray:
        y = x[:, 1]
        profile = (y - 4.0) * (8.0 - y)
        left = x[:, 0] < box.x0 + BOUNDARY_TOL
        right = x[:, 0] > box.x1 - BOUNDARY_TOL
        return np.where(left, 0.25 * profile, np.where(right, 0.1875 * profile, 0.0))

    if config.kdarcy is not None:
        k_darcy: float | RandomConductivity = config.kdarcy
    else:
        k_darcy = RandomConductivity(box, seed=config.seed)
    bdata = BoundaryData(
        g1=wall_flux,
        darcy_pressure=lambda x: np.full(len(x), -1e3),
        darcy_pressure_region=lambda m: m[:, 1] < box.y0 + BOUNDARY_TOL,
        c_in=lambda x, t: np.ones(len(x)),
    )
    times = tuple(config.times) if config.times else EX4_TIMES
    dt, t_final = config.time_grid(1e-3, max(times))
    return DemoSetup(
        case_id="ex4",
        mesh=mesh,
        k=config.k,
        flow_params=FlowParams(
            epsilon=config.value("epsilon", 1.0),
            alpha=config.value("alpha", 1.0),
            k_darcy=k_darcy,
        ),
        bdata=bdata,
        transport_params=TransportParams(
            k_diff=config.value("kdiff", 1.0),
            porosity=1.0,
            source=lambda x, t: np.full(len(x), 0.01),
            dt=dt,
            t_final=t_final,
        ),
        times=times,
    )


DEMO_SETUPS: dict[str, Callable[[RunConfig], DemoSetup]] = {"ex3": ex3_setup, "ex4": ex4_setup}


def concentration_centroid(
    spaces: TransportSpaces, c: np.ndarray, exactness: int = 6
) -> tuple[float, float]:
    """∫ x c / ∫ c; NaN when the total concentration vanishes."""
    quad = volume_quadrature(spaces.uh, exactness)
    values = spaces.uh.evaluate(c, quad.xi)[..., 0]
    total = float(np.sum(quad.weights * values))
    if abs(total) < 1e-300:
        return math.nan, math.nan
    moments = np.einsum("nq,nq,nqd->d", quad.weights, values, quad.points)
    return float(moments[0] / total), float(moments[1] / total)


@dataclass
class Snapshot:
    state: TransportState
    centroid: tuple[float, float]
    dump: Path | None = None


@dataclass
class DemoResult:
    """Flow solution, transport run and kept snapshots of a demonstration."""

    setup: DemoSetup
    flow: FlowSolution
    conservation: ConservationReport
    run: TransportRun
    snapshots: list[Snapshot] = field(default_factory=list)
    artifacts: list[Path] = field(default_factory=list)

    def snapshot_at(self, t: float) -> Snapshot:
        dt = self.setup.transport_params.dt
        for snapshot in self.snapshots:
            if abs(snapshot.state.t - t) < 0.5 * dt:
                return snapshot
        raise KeyError(f"no snapshot at t={t}")


def _snapshot_filter(
    times: tuple[float, ...], dt: float, stride: int
) -> Callable[[TransportState], bool]:
    wanted = (0.0, *times)

    def keep(state: TransportState) -> bool:
        if stride and state.n % stride == 0:
            return True
        return any(abs(state.t - t) < 0.5 * dt for t in wanted)

    return keep


def run_demo(
    case_id: str,
    config: RunConfig,
    settings: SolverSettings | None = None,
    out: Path | None = None,
) -> DemoResult:
    """Solve the flow, run transport to the last snapshot time and write artifacts to ``out``."""
    settings = settings or SolverSettings()
    if case_id not in DEMO_SETUPS:
        raise ConfigError(
            f"unknown demo '{case_id}', expected one of {', '.join(DEMO_CASES)}", key="case"
        )
    setup = DEMO_SETUPS[case_id](config)
    mesh, params = setup.mesh, setup.transport_params
    late = [t for t in setup.times if t > params.t_final + 0.5 * params.dt]
    if late:
        logger.warning(f"Snapshot times {late} lie beyond T={params.t_final} and are skipped")

    spaces = build_flow_spaces(mesh, setup.k, brinkman_velocity_mode=setup.full_velocity,
                               cond_max=settings.unisolvence_cond_max)
    flow = solve_flow(mesh, spaces, setup.flow_params, setup.bdata, settings)
    conservation = verify_conservation(flow, settings.data_quadrature_exactness)

    transport_spaces = build_transport_spaces(mesh, setup.k, settings.unisolvence_cond_max)
    keep = _snapshot_filter(setup.times, params.dt, config.dump_stride)
    run = run_transport(mesh, transport_spaces, params, flow, setup.bdata, settings, keep=keep)
    if not np.all(np.isfinite(run.final.c)):
        raise SolverError(f"{case_id}: concentration is not finite", step=run.final.n)

    result = DemoResult(setup=setup, flow=flow, conservation=conservation, run=run)
    for state in run.states:
        snapshot = Snapshot(state=state, centroid=concentration_centroid(transport_spaces, state.c))
        if out is not None:
            fields = transport_fields(transport_spaces, state)
            snapshot.dump = write_field_dump(out / f"{case_id}_c_{state.n:07d}.dump", mesh,
                                             fields, setup.k, t=state.t)
            result.artifacts.append(snapshot.dump)
            if any(abs(state.t - t) < 0.5 * params.dt for t in setup.times):
                result.artifacts.append(write_nodal_csv(
                    out / f"{case_id}_c_{state.n:07d}.csv", mesh, fields, setup.k))
        result.snapshots.append(snapshot)
        logger.info(
            f"{case_id} snapshot t={state.t:.3f}: centroid=({snapshot.centroid[0]:.4f}, "
            f"{snapshot.centroid[1]:.4f})"
        )

    if out is not None:
        stability_csv = out / f"{case_id}_stability.csv"
        result.artifacts.append(write_stability_report(run.report, stability_csv))
        summary = stability_summary(run.report)
        summary.update({
            "case": case_id,
            "conservation_worst": float(conservation.worst()),
            "centroids": [[float(s.state.t), *map(float, s.centroid)] for s in result.snapshots],
        })
        result.artifacts.append(write_summary(summary, out / f"{case_id}_summary.yaml"))
    return result
