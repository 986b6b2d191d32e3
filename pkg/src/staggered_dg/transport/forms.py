"""Operator blocks of the upwinding staggered DG transport scheme."""

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from staggered_dg.exceptions import ConfigError
from staggered_dg.fem.assembly import (
    EdgeQuadrature,
    edge_quadrature,
    evaluate_coefficient,
    evaluate_field,
    inverse_coefficient,
    mass_matrix,
    scatter_matrix,
    scatter_vector,
    volume_quadrature,
)
from staggered_dg.fem.spaces import DEFAULT_COND_MAX, FeSpace, SpaceKind, build_space
from staggered_dg.flow.forms import (
    AVERAGE,
    JUMP,
    ONE_SIDED,
    edge_form,
    identity,
    normal_component,
    volume_form,
)
from staggered_dg.flow.solver import FlowSolution, darcy_boundary_split
from staggered_dg.mesh.boundary import BoundaryFlow, NormalData, classify_boundary_flow
from staggered_dg.mesh.primal import Subdomain
from staggered_dg.mesh.staggered import EdgeKind, StaggeredMesh
from staggered_dg.models.config import SolverSettings
from staggered_dg.models.params import BoundaryData, TransportParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransportSpaces:
    """U_h (concentration) and W_h (diffusive flux) over the whole of Ω."""

    mesh: StaggeredMesh
    k: int
    uh: FeSpace
    wh: FeSpace


def build_transport_spaces(
    mesh: StaggeredMesh, k: int, cond_max: float = DEFAULT_COND_MAX
) -> TransportSpaces:
    uh = build_space(SpaceKind.UH, mesh, k, cond_max=cond_max)
    wh = build_space(SpaceKind.WH, mesh, k, cond_max=cond_max)
    logger.info(f"Transport DOFs: c={uh.n_dofs}, z={wh.n_dofs}")
    return TransportSpaces(mesh=mesh, k=k, uh=uh, wh=wh)


def boundary_normal_data(mesh: StaggeredMesh, bdata: BoundaryData) -> NormalData:
    """Prescribed u·n on ∂Ω: g1 on Γ_B, g2 on Γ_D flux edges, NaN on pressure edges.

    Points are attributed to the nearest boundary edge.
    """
    edges = mesh.edges_of(EdgeKind.PRIMAL_BOUNDARY)
    start = mesh.points[mesh.edges[edges, 0]]
    direction = mesh.points[mesh.edges[edges, 1]] - start
    length2 = np.einsum("ed,ed->e", direction, direction)
    brinkman = mesh.edge_subdomain[edges] == int(Subdomain.BRINKMAN)
    pressure = np.isin(edges, darcy_boundary_split(mesh, bdata)[1])

    def normal_data(x: np.ndarray, normals: np.ndarray) -> np.ndarray:
        offset = x[:, None, :] - start[None, :, :]
        t = np.clip(np.einsum("ped,ed->pe", offset, direction) / length2, 0.0, 1.0)
        gap = offset - t[..., None] * direction[None, :, :]
        owner = np.argmin(np.einsum("ped,ped->pe", gap, gap), axis=1)
        result = np.where(
            brinkman[owner],
            bdata.brinkman_flux(x, normals),
            bdata.darcy_flux(x, normals),
        )
        return np.where(pressure[owner], np.nan, result)

    return normal_data


@dataclass
class TransportBlocks:
    """Time-independent blocks; the first index of every block is the test space."""

    spaces: TransportSpaces
    boundary: BoundaryFlow
    boundary_quad: EdgeQuadrature
    discrete_flux: np.ndarray  # u_h·n at the boundary points
    mass_k: sparse.csr_matrix  # (K^{-1} z, ψ)
    t_star: sparse.csr_matrix  # T_h*(c, ψ): rows WH, cols UH
    t_form: sparse.csr_matrix  # T_h(z, q): rows UH, cols WH
    mass_phi: sparse.csr_matrix  # (φ c, q)
    convection: sparse.csr_matrix  # −(u_h c, ∇q)
    upwind: sparse.csr_matrix  # S_h(c, q)
    outflow: sparse.csr_matrix  # (u_h·n c, q)_{Γ_out}
    # ½((u−u_h)·n c, q)_{Γ_out} − ½((u−u_h)·n c, q)_{Γ_in}
    correction: sparse.csr_matrix
    reaction: sparse.csr_matrix  # (f⁻ c, q)
    volume_exactness: int
    edge_exactness: int

    @property
    def advection(self) -> sparse.csr_matrix:
        """Every c-c block except the time derivative."""
        return (self.convection + self.upwind + self.outflow + self.correction
                + self.reaction).tocsr()

    def system_matrix(self, dt: float) -> sparse.csr_matrix:
        """Backward Euler matrix with rows (ψ, q) and columns (z, c)."""
        return sparse.bmat(
            [
                [self.mass_k, -self.t_star],
                [self.t_form, self.mass_phi / dt + self.advection],
            ],
            format="csc",
        )


def darcy_cell_mask(space: FeSpace) -> np.ndarray:
    """True on the cells of a space lying in Ω_D."""
    return space.mesh.tri_subdomain[space.tris] == int(Subdomain.DARCY)


def source_split(
    source: Callable[[np.ndarray], np.ndarray] | None, points: np.ndarray, mask: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """f⁺ = max(f, 0) and f⁻ = max(−f, 0) at (ncell, nq) points, zero outside Ω_D."""
    if source is None:
        zeros = np.zeros(points.shape[:-1])
        return zeros, zeros
    values = evaluate_field(source, points) * mask[:, None]
    return np.maximum(values, 0.0), np.maximum(-values, 0.0)


def _upwind_block(
    uh: FeSpace, quad: EdgeQuadrature, normal_flux: np.ndarray
) -> sparse.csr_matrix:
    """Σ_dl ∫ {c}⟦q⟧ u_h·n + ½ ∫ ⟦c⟧⟦q⟧ |u_h·n|."""
    central = edge_form(uh, JUMP, identity, uh, AVERAGE, identity, quad, scale=normal_flux)
    jumps = edge_form(uh, JUMP, identity, uh, JUMP, identity, quad,
                      scale=0.5 * np.abs(normal_flux))
    return (central + jumps).tocsr()


def _t_star(
    spaces: TransportSpaces, volume_exactness: int, edge_exactness: int
) -> sparse.csr_matrix:
    """T_h*(c, ψ) = Σ_τ (c, ∇·ψ) − Σ_{F_pr} (c, ⟦ψ⟧·n)."""
    mesh, uh, wh = spaces.mesh, spaces.uh, spaces.wh
    quad = volume_quadrature(wh, volume_exactness)
    total = volume_form(wh, wh.divergences(quad.xi)[:, :, None, :],
                        uh, uh.values(quad.xi), quad.weights)
    interior = np.concatenate([mesh.edges_of(EdgeKind.PRIMAL_INTERIOR),
                               mesh.edges_of(EdgeKind.INTERFACE)])
    inner = edge_quadrature(mesh, np.sort(interior), edge_exactness)
    total = total + edge_form(wh, JUMP, normal_component, uh, AVERAGE, identity, inner,
                              scale=-1.0)
    outer = edge_quadrature(mesh, mesh.edges_of(EdgeKind.PRIMAL_BOUNDARY), edge_exactness)
    total = total + edge_form(wh, ONE_SIDED, normal_component, uh, ONE_SIDED, identity, outer,
                              scale=-1.0)
    return total.tocsr()


def _t_form(
    spaces: TransportSpaces, volume_exactness: int, edge_exactness: int
) -> sparse.csr_matrix:
    """T_h(z, q) = −Σ_τ (z, ∇q) + Σ_dl (z·n, ⟦q⟧)."""
    mesh, uh, wh = spaces.mesh, spaces.uh, spaces.wh
    quad = volume_quadrature(uh, volume_exactness)
    grads = uh.gradients(quad.xi)[:, :, 0, :, :]
    total = volume_form(uh, grads, wh, wh.values(quad.xi), quad.weights, scale=-1.0)
    dual = edge_quadrature(mesh, mesh.edges_of(EdgeKind.DUAL), edge_exactness)
    total = total + edge_form(uh, JUMP, identity, wh, AVERAGE, normal_component, dual)
    return total.tocsr()


def assemble_transport(
    mesh: StaggeredMesh,
    spaces: TransportSpaces,
    params: TransportParams,
    flow: FlowSolution,
    bdata: BoundaryData,
    settings: SolverSettings | None = None,
) -> TransportBlocks:
    """Assemble every time-independent block of the transport step."""
    settings = settings or SolverSettings()
    if spaces.mesh is not mesh or flow.mesh is not mesh:
        raise ConfigError("transport spaces and flow solution need the same mesh", key="mesh")
    k = spaces.k
    volume_exactness = settings.transport_volume_exactness(k)
    edge_exactness = settings.transport_edge_exactness(k)
    uh = spaces.uh

    vquad = volume_quadrature(uh, volume_exactness)
    values = uh.values(vquad.xi)
    grads = uh.gradients(vquad.xi)[:, :, 0, :, :]
    velocity = flow.velocity(vquad.xi)[uh.tris]
    advected = np.einsum("nqd,nqj->nqdj", velocity, values[:, :, 0, :])
    convection = volume_form(uh, grads, uh, advected, vquad.weights, scale=-1.0)

    dual = edge_quadrature(mesh, mesh.edges_of(EdgeKind.DUAL), edge_exactness)
    upwind = _upwind_block(uh, dual, flow.normal_velocity(dual.edges, dual.s, side=0))

    outer = edge_quadrature(mesh, mesh.edges_of(EdgeKind.PRIMAL_BOUNDARY), edge_exactness)
    discrete_flux = flow.normal_velocity(outer.edges, outer.s, side=0)
    boundary = classify_boundary_flow(
        mesh, boundary_normal_data(mesh, bdata), edge_exactness, fallback=discrete_flux
    )
    outflow_scale = np.where(boundary.outflow, discrete_flux, 0.0)
    correction_scale = 0.5 * (boundary.normal_flux - discrete_flux) * np.where(
        boundary.outflow, 1.0, -1.0
    )
    outflow = edge_form(uh, ONE_SIDED, identity, uh, ONE_SIDED, identity, outer,
                        scale=outflow_scale)
    correction = edge_form(uh, ONE_SIDED, identity, uh, ONE_SIDED, identity, outer,
                           scale=correction_scale)

    _, f_minus = source_split(params.darcy_source, vquad.points, darcy_cell_mask(uh))
    local = np.einsum("nq,nq,nqi,nqj->nij", vquad.weights, f_minus,
                      values[:, :, 0, :], values[:, :, 0, :])
    reaction = scatter_matrix(uh.dofs, uh.dofs, local, (uh.n_dofs, uh.n_dofs))

    blocks = TransportBlocks(
        spaces=spaces,
        boundary=boundary,
        boundary_quad=outer,
        discrete_flux=discrete_flux,
        mass_k=mass_matrix(spaces.wh, volume_exactness, inverse_coefficient(params.k_diff)),
        t_star=_t_star(spaces, volume_exactness, edge_exactness),
        t_form=_t_form(spaces, volume_exactness, edge_exactness),
        mass_phi=mass_matrix(uh, volume_exactness, params.porosity),
        convection=convection,
        upwind=upwind,
        outflow=outflow,
        correction=correction,
        reaction=reaction,
        volume_exactness=volume_exactness,
        edge_exactness=edge_exactness,
    )
    logger.debug(
        f"Assembled transport blocks: |T - T*^T| = "
        f"{abs(blocks.t_form - blocks.t_star.T).max():.2e}"
    )
    return blocks


@dataclass(frozen=True)
class TransportLoad:
    """Right-hand side pieces of one step at t^{n+1}."""

    source: np.ndarray  # (φ s, q)
    inflow: np.ndarray  # −(c_in u·n, q)_{Γ_in}
    injection: np.ndarray  # (ĉ f⁺, q)

    @property
    def total(self) -> np.ndarray:
        return self.source + self.inflow + self.injection


def assemble_transport_rhs(
    blocks: TransportBlocks, params: TransportParams, bdata: BoundaryData, t: float
) -> TransportLoad:
    """(φ s, q) − (c_in u·n, q)_{Γ_in} + (ĉ f⁺, q) at time t."""
    uh = blocks.spaces.uh
    quad = volume_quadrature(uh, blocks.volume_exactness)
    values = uh.values(quad.xi)[:, :, 0, :]

    source = np.zeros(uh.n_dofs)
    if params.source is not None:
        phi = evaluate_coefficient(params.porosity, quad.points)
        data = phi * evaluate_field(params.source, quad.points, t)
        source = scatter_vector(uh.dofs, np.einsum("nq,nq,nql->nl", quad.weights, data, values),
                                uh.n_dofs)

    injection = np.zeros(uh.n_dofs)
    if params.c_hat is not None and params.darcy_source is not None:
        f_plus, _ = source_split(params.darcy_source, quad.points, darcy_cell_mask(uh))
        data = f_plus * evaluate_field(params.c_hat, quad.points, t)
        injection = scatter_vector(
            uh.dofs, np.einsum("nq,nq,nql->nl", quad.weights, data, values), uh.n_dofs
        )

    inflow = np.zeros(uh.n_dofs)
    boundary = blocks.boundary
    if bdata.c_in is not None and boundary.inflow.any():
        outer = blocks.boundary_quad
        c_in = evaluate_field(bdata.c_in, boundary.points, t)
        data = np.where(boundary.inflow, c_in * boundary.normal_flux, 0.0)
        traces, dofs = uh.trace(outer.edges, 0, outer.s)
        local = np.einsum("mq,mq,mql->ml", outer.weights, data, traces[:, :, 0, :])
        inflow = -scatter_vector(dofs, local, uh.n_dofs)
    return TransportLoad(source=source, inflow=inflow, injection=injection)
