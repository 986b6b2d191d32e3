"""Backward Euler time stepping with energy and mass diagnostics."""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from staggered_dg.fem.assembly import (
    edge_quadrature,
    evaluate_coefficient,
    evaluate_field,
    volume_quadrature,
)
from staggered_dg.fem.projection import project_l2
from staggered_dg.flow.solver import FlowSolution, SparseSolver
from staggered_dg.mesh.staggered import EdgeKind, StaggeredMesh
from staggered_dg.models.config import SolverSettings
from staggered_dg.models.params import BoundaryData, TransportParams
from staggered_dg.models.reports import StabilityReport, StepRecord
from staggered_dg.transport.forms import (
    TransportBlocks,
    TransportLoad,
    TransportSpaces,
    assemble_transport,
    assemble_transport_rhs,
    darcy_cell_mask,
    source_split,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransportState:
    """(c_h^n, z_h^n) at time level n."""

    n: int
    t: float
    c: np.ndarray
    z: np.ndarray


@dataclass
class TransportRun:
    """Kept states of a run plus its stability report."""

    states: list[TransportState]
    report: StabilityReport
    final: TransportState
    blocks: TransportBlocks = field(repr=False)


def _quadratic(matrix: sparse.spmatrix, x: np.ndarray) -> float:
    return float(x @ (matrix @ x))


def initial_state(blocks: TransportBlocks, params: TransportParams) -> TransportState:
    """c_h^0 = L²-projection of c⁰ onto U_h and z_h^0 from the flux equation."""
    spaces = blocks.spaces
    if params.c_initial is None:
        c = np.zeros(spaces.uh.n_dofs)
    else:
        c = project_l2(params.c_initial, spaces.uh)
    rhs = blocks.t_star @ c
    z = np.asarray(spsolve(blocks.mass_k.tocsc(), rhs)) if np.any(rhs) else np.zeros(len(rhs))
    return TransportState(n=0, t=0.0, c=c, z=z)


def step_backward_euler(
    state: TransportState,
    blocks: TransportBlocks,
    load: TransportLoad,
    dt: float,
    solver: SparseSolver | None = None,
) -> TransportState:
    """Advance (c_h, z_h) by one backward Euler step with right-hand side data at t^{n+1}."""
    if solver is None:
        solver = SparseSolver(blocks.system_matrix(dt))
    n_z = blocks.spaces.wh.n_dofs
    rhs = np.concatenate([np.zeros(n_z), blocks.mass_phi @ state.c / dt + load.total])
    x, _ = solver.solve(rhs, step=state.n + 1)
    return TransportState(n=state.n + 1, t=state.t + dt, c=x[n_z:], z=x[:n_z])


class StepDiagnostics:
    """Energy identity, mass ledger and stability-bound terms of single steps."""

    def __init__(
        self,
        blocks: TransportBlocks,
        params: TransportParams,
        flow: FlowSolution,
    ) -> None:
        self.blocks = blocks
        self.params = params
        uh = blocks.spaces.uh
        self.ones = uh.interpolate(lambda x: np.ones(len(x)))
        self.quad = volume_quadrature(uh, blocks.volume_exactness)
        self.values = uh.values(self.quad.xi)[:, :, 0, :]
        self.phi = evaluate_coefficient(params.porosity, self.quad.points)
        self.phi_max = float(self.phi.max()) if self.phi.size else 1.0
        self.divergence = self._velocity_divergence(flow)
        self.f_plus, self.f_minus = source_split(params.darcy_source, self.quad.points,
                                                 darcy_cell_mask(uh))
        mesh = blocks.spaces.mesh
        self.dual = edge_quadrature(mesh, mesh.edges_of(EdgeKind.DUAL), blocks.edge_exactness)
        self.dual_flux = flow.normal_velocity(self.dual.edges, self.dual.s, side=0)

    def _velocity_divergence(self, flow: FlowSolution) -> np.ndarray:
        """∇·u_h at the volume points of U_h, shape (ntri, nq)."""
        result = np.zeros(self.quad.weights.shape)
        for space, coefficients in ((flow.spaces.hb, flow.ub), (flow.spaces.hd, flow.ud)):
            if len(space.tris):
                grads = space.evaluate_gradient(coefficients, self.quad.xi)
                result[space.tris] = grads[:, :, 0, 0] + grads[:, :, 1, 1]
        return result

    def cell_values(self, c: np.ndarray) -> np.ndarray:
        return np.einsum("nql,nl->nq", self.values, self.blocks.spaces.uh.local_values(c))

    def mass(self, c: np.ndarray) -> float:
        """∫ φ c_h."""
        return float(self.ones @ (self.blocks.mass_phi @ c))

    def energy_residual(
        self, previous: TransportState, current: TransportState, load: TransportLoad, dt: float
    ) -> tuple[float, float]:
        """Residual and scale of the discrete energy identity tested with the new state."""
        blocks = self.blocks
        uh = blocks.spaces.uh
        c0, c1 = previous.c, current.c
        values = self.cell_values(c1)
        w = self.quad.weights
        terms = {
            "flux": _quadratic(blocks.mass_k, current.z),
            "time": (_quadratic(blocks.mass_phi, c1) - _quadratic(blocks.mass_phi, c0)
                     + _quadratic(blocks.mass_phi, c1 - c0)) / (2.0 * dt),
            "divergence": 0.5 * float(np.sum(w * values**2 * self.divergence)),
            "reaction": float(np.sum(w * values**2 * self.f_minus)),
        }
        jump_total = 0.0
        if len(self.dual.edges):
            dual = self.dual
            jump = (uh.evaluate_trace(c1, dual.edges, 0, dual.s)
                    - uh.evaluate_trace(c1, dual.edges, 1, dual.s))[..., 0]
            jump_total = 0.5 * float(np.sum(dual.weights * jump**2 * np.abs(self.dual_flux)))
        terms["jumps"] = jump_total
        outer = blocks.boundary_quad
        trace = uh.evaluate_trace(c1, outer.edges, 0, outer.s)[..., 0]
        terms["boundary"] = 0.5 * float(
            np.sum(outer.weights * np.abs(blocks.boundary.normal_flux) * trace**2)
        )
        lhs = sum(terms.values())
        rhs = float(load.total @ c1)
        scale = max(sum(abs(v) for v in terms.values()), abs(rhs), 1e-300)
        return lhs - rhs, scale

    def fluxes(self, current: TransportState, load: TransportLoad) -> tuple[float, float]:
        """Boundary influx and outflux rates of one step."""
        blocks = self.blocks
        influx = float(self.ones @ load.inflow)
        outflux = float(self.ones @ ((blocks.outflow + blocks.correction) @ current.c))
        return influx, outflux

    def ledger(
        self, previous: TransportState, current: TransportState, load: TransportLoad, dt: float
    ) -> float:
        """Relative mass-ledger residual d(∫φc) − Δt(in − out + sources − reaction)."""
        influx, outflux = self.fluxes(current, load)
        sources = float(self.ones @ (load.source + load.injection))
        reaction = float(self.ones @ (self.blocks.reaction @ current.c))
        change = self.mass(current.c) - self.mass(previous.c)
        budget = dt * (influx - outflux + sources - reaction)
        scale = max(abs(self.mass(current.c)), abs(self.mass(previous.c)),
                    dt * (abs(influx) + abs(outflux) + abs(sources) + abs(reaction)), 1e-300)
        return (change - budget) / scale

    def data_terms(self, t: float, bdata: BoundaryData, dt: float) -> float:
        """Δt(‖φ^{1/2}s‖² + (|u·n|, c_in²)_{Γ_in} + (ĉ², f⁺)) at time t."""
        params = self.params
        w = self.quad.weights
        total = 0.0
        if params.source is not None:
            s = evaluate_field(params.source, self.quad.points, t)
            total += float(np.sum(w * self.phi * s**2))
        boundary = self.blocks.boundary
        if bdata.c_in is not None and boundary.inflow.any():
            c_in = evaluate_field(bdata.c_in, boundary.points, t)
            total += float(np.sum(np.where(boundary.inflow, boundary.weights
                                           * np.abs(boundary.normal_flux) * c_in**2, 0.0)))
        if params.c_hat is not None and params.darcy_source is not None:
            c_hat = evaluate_field(params.c_hat, self.quad.points, t)
            total += float(np.sum(w * c_hat**2 * self.f_plus))
        return dt * total

    def initial_term(self) -> float:
        """φ* ‖c⁰‖²."""
        if self.params.c_initial is None:
            return 0.0
        c0 = evaluate_field(self.params.c_initial, self.quad.points)
        return self.phi_max * float(np.sum(self.quad.weights * c0**2))


def run_transport(
    mesh: StaggeredMesh,
    spaces: TransportSpaces,
    params: TransportParams,
    flow: FlowSolution,
    bdata: BoundaryData,
    settings: SolverSettings | None = None,
    keep: Callable[[TransportState], bool] | None = None,
) -> TransportRun:
    """Run N = round(T/Δt) backward Euler steps with one factorization.

    ``keep`` selects the states stored in the run; by default every state is kept.
    """
    settings = settings or SolverSettings()
    blocks = assemble_transport(mesh, spaces, params, flow, bdata, settings)
    dt = params.dt
    solver = SparseSolver(blocks.system_matrix(dt), settings.solver_residual_tol,
                          settings.refinement_steps)
    diagnostics = StepDiagnostics(blocks, params, flow)

    state = initial_state(blocks, params)
    states = [state] if keep is None or keep(state) else []
    records: list[StepRecord] = []
    flux_energy = 0.0
    data_side = diagnostics.initial_term()
    for n in range(params.n_steps):
        t = (n + 1) * dt
        load = assemble_transport_rhs(blocks, params, bdata, t)
        new = step_backward_euler(state, blocks, load, dt, solver)
        new = TransportState(n=new.n, t=t, c=new.c, z=new.z)
        energy, scale = diagnostics.energy_residual(state, new, load, dt)
        influx, outflux = diagnostics.fluxes(new, load)
        z_norm2 = _quadratic(blocks.mass_k, new.z)
        record = StepRecord(
            step=new.n,
            t=t,
            c_norm=float(np.sqrt(max(_quadratic(blocks.mass_phi, new.c), 0.0))),
            z_norm=float(np.sqrt(max(z_norm2, 0.0))),
            influx=influx,
            outflux=outflux,
            mass=diagnostics.mass(new.c),
            ledger=diagnostics.ledger(state, new, load, dt),
            energy_residual=energy / scale,
        )
        records.append(record)
        logger.debug(
            f"Step {record.step}: t={t:.4f}, |c|={record.c_norm:.4e}, mass={record.mass:.6e}, "
            f"ledger={record.ledger:.1e}, energy={record.energy_residual:.1e}"
        )
        flux_energy += 2.0 * dt * z_norm2
        data_side += diagnostics.data_terms(t, bdata, dt)
        state = new
        if keep is None or keep(state):
            states.append(state)

    final_c_norm2 = _quadratic(blocks.mass_phi, state.c)
    report = StabilityReport(lhs=flux_energy + final_c_norm2, rhs=data_side, records=records)
    logger.info(
        f"Transport finished: {params.n_steps} steps, stability ratio {report.ratio:.3e}, "
        f"max ledger {report.max_ledger():.1e}, max energy residual "
        f"{report.max_energy_residual():.1e}"
    )
    return TransportRun(states=states, report=report, final=state, blocks=blocks)
