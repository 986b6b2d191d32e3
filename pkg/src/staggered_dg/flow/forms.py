"""Bilinear forms of the coupled Brinkman-Darcy scheme."""

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from staggered_dg.exceptions import ConfigError
from staggered_dg.fem.assembly import (
    EdgeQuadrature,
    edge_quadrature,
    inverse_coefficient,
    mass_matrix,
    scatter_matrix,
    volume_quadrature,
)
from staggered_dg.fem.spaces import FeSpace, SpaceKind
from staggered_dg.mesh.primal import Subdomain
from staggered_dg.mesh.staggered import EdgeKind, StaggeredMesh
from staggered_dg.models.params import FlowParams

logger = logging.getLogger(__name__)

# A trace functional maps traces (m, nq, ncomp, nloc) to (m, nq, r, nloc).
Functional = Callable[[np.ndarray, EdgeQuadrature], np.ndarray]
Sides = tuple[tuple[int, float], ...]

JUMP: Sides = ((0, 1.0), (1, -1.0))
AVERAGE: Sides = ((0, 0.5), (1, 0.5))
ONE_SIDED: Sides = ((0, 1.0),)


def identity(values: np.ndarray, quad: EdgeQuadrature) -> np.ndarray:
    return values


def normal_component(values: np.ndarray, quad: EdgeQuadrature) -> np.ndarray:
    """v·n of a vector trace."""
    return np.einsum("mqcl,mc->mql", values, quad.normals)[:, :, None, :]


def tangential_component(values: np.ndarray, quad: EdgeQuadrature) -> np.ndarray:
    """v·t of a vector trace."""
    return np.einsum("mqcl,mc->mql", values, quad.tangents)[:, :, None, :]


def tensor_normal(values: np.ndarray, quad: EdgeQuadrature) -> np.ndarray:
    """G n of a row-major tensor trace."""
    m, nq, _, nloc = values.shape
    return np.einsum("mqidl,md->mqil", values.reshape(m, nq, 2, 2, nloc), quad.normals)


def tensor_normal_normal(values: np.ndarray, quad: EdgeQuadrature) -> np.ndarray:
    """(G n)·n."""
    return normal_component(tensor_normal(values, quad), quad)


def tensor_normal_tangent(values: np.ndarray, quad: EdgeQuadrature) -> np.ndarray:
    """(G n)·t."""
    return tangential_component(tensor_normal(values, quad), quad)


def edge_form(
    rows: FeSpace,
    row_sides: Sides,
    row_functional: Functional,
    cols: FeSpace,
    col_sides: Sides,
    col_functional: Functional,
    quad: EdgeQuadrature,
    scale: float | np.ndarray = 1.0,
) -> sparse.csr_matrix:
    """Σ_e ∫_e scale · R(test) · C(trial) with jump/average side weights.

    ``scale`` is a constant or per-point values of shape (m, nq).
    """
    shape = (rows.n_dofs, cols.n_dofs)
    total = sparse.csr_matrix(shape)
    if len(quad.edges) == 0:
        return total
    weights = quad.weights * scale
    row_traces = []
    for side, weight in row_sides:
        values, dofs = rows.trace(quad.edges, side, quad.s)
        row_traces.append((dofs, weight * row_functional(values, quad)))
    for side, weight in col_sides:
        values, col_dofs = cols.trace(quad.edges, side, quad.s)
        trial = weight * col_functional(values, quad)
        for row_dofs, test in row_traces:
            local = np.einsum("mq,mqri,mqrj->mij", weights, test, trial)
            total = total + scatter_matrix(row_dofs, col_dofs, local, shape)
    return total


def volume_form(
    rows: FeSpace, row_values: np.ndarray, cols: FeSpace, col_values: np.ndarray,
    weights: np.ndarray, scale: float = 1.0,
) -> sparse.csr_matrix:
    """∫ scale · test · trial for tabulations (n, nq, r, nloc) on a shared cell list."""
    local = scale * np.einsum("nq,nqri,nqrj->nij", weights, row_values, col_values)
    return scatter_matrix(rows.dofs, cols.dofs, local, (rows.n_dofs, cols.n_dofs))


@dataclass(frozen=True)
class FlowSpaces:
    """The five flow spaces on one staggered mesh with a common degree."""

    mesh: StaggeredMesh
    k: int
    wb: FeSpace
    hb: FeSpace
    qb: FeSpace
    hd: FeSpace
    qd: FeSpace
    brinkman_velocity_mode: bool = False

    def __post_init__(self) -> None:
        expected = (SpaceKind.WB, SpaceKind.HB, SpaceKind.QB, SpaceKind.HD, SpaceKind.QD)
        for space, kind in zip(self.all, expected):
            if space.kind is not kind:
                raise ConfigError(f"expected {kind.value}, got {space.kind.value}", key="spaces")
            if space.mesh is not self.mesh or space.degree != self.k:
                raise ConfigError(
                    f"space {space.kind.value} is not built on this mesh with k={self.k}",
                    key="spaces",
                )

    @property
    def all(self) -> tuple[FeSpace, ...]:
        return (self.wb, self.hb, self.qb, self.hd, self.qd)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(space.n_dofs for space in self.all)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)])


@dataclass
class FlowForms:
    """Sparse blocks; the first index of every block is the test space."""

    mass_l: sparse.csr_matrix  # (ε^{-1} L, G)
    b_star: sparse.csr_matrix  # B_h*(u, G): rows WB, cols HB
    b_form: sparse.csr_matrix  # B_h(L, v): rows HB, cols WB
    mass_alpha: sparse.csr_matrix  # (α u, v)
    bs_star: sparse.csr_matrix  # b_h*(p, v): rows HB, cols QB
    bs_form: sparse.csr_matrix  # b_h(u, q): rows QB, cols HB
    mass_k: sparse.csr_matrix  # (K_D^{-1} u, v)
    a_form: sparse.csr_matrix  # A_h(v, p) = (p, div v): rows HD, cols QD
    i_form: sparse.csr_matrix  # I_h(p, v) = Σ_Γ (v·n_D, p): rows HD, cols QB


def brinkman_edges(mesh: StaggeredMesh) -> dict[str, np.ndarray]:
    """Edge sets of Ω_B: interior primal, Γ_B, dual and interface edges."""
    return {
        "primal_interior": mesh.edges_of(EdgeKind.PRIMAL_INTERIOR, Subdomain.BRINKMAN),
        "boundary": mesh.edges_of(EdgeKind.PRIMAL_BOUNDARY, Subdomain.BRINKMAN),
        "dual": mesh.edges_of(EdgeKind.DUAL, Subdomain.BRINKMAN),
        "interface": mesh.edges_of(EdgeKind.INTERFACE),
    }


def assemble_b_star(
    spaces: FlowSpaces, edge_exactness: int, volume_exactness: int
) -> sparse.csr_matrix:
    """B_h*(u, G) = Σ_dl (⟦G n⟧, (u·n) n)_e − (div_h G, u)."""
    mesh = spaces.mesh
    dual = edge_quadrature(mesh, brinkman_edges(mesh)["dual"], edge_exactness)
    edge = edge_form(spaces.wb, JUMP, tensor_normal_normal,
                     spaces.hb, AVERAGE, normal_component, dual)
    quad = volume_quadrature(spaces.hb, volume_exactness)
    volume = volume_form(spaces.wb, spaces.wb.divergences(quad.xi),
                         spaces.hb, spaces.hb.values(quad.xi), quad.weights, scale=-1.0)
    return (edge + volume).tocsr()


def assemble_b_form(
    spaces: FlowSpaces, edge_exactness: int, volume_exactness: int
) -> sparse.csr_matrix:
    """B_h(L, v) = −Σ_{pr,B}^0 (L n, ⟦v⟧) − Σ_dl ((L n)·t, ⟦v·t⟧) + (L, ∇_h v).

    In full-velocity mode L n is free on Γ_B and −(L n, v)_{Γ_B} is added.
    """
    mesh = spaces.mesh
    sets = brinkman_edges(mesh)
    primal = edge_quadrature(mesh, sets["primal_interior"], edge_exactness)
    dual = edge_quadrature(mesh, sets["dual"], edge_exactness)
    total = edge_form(spaces.hb, JUMP, identity, spaces.wb, AVERAGE, tensor_normal, primal,
                      scale=-1.0)
    total = total + edge_form(spaces.hb, JUMP, tangential_component,
                              spaces.wb, AVERAGE, tensor_normal_tangent, dual, scale=-1.0)
    if spaces.brinkman_velocity_mode:
        boundary = edge_quadrature(mesh, sets["boundary"], edge_exactness)
        total = total + edge_form(spaces.hb, ONE_SIDED, identity,
                                  spaces.wb, ONE_SIDED, tensor_normal, boundary, scale=-1.0)
    quad = volume_quadrature(spaces.hb, volume_exactness)
    grads = spaces.hb.gradients(quad.xi)
    n, nq = grads.shape[:2]
    grads = grads.reshape(n, nq, 4, -1)
    total = total + volume_form(spaces.hb, grads, spaces.wb, spaces.wb.values(quad.xi),
                                quad.weights)
    return total.tocsr()


def assemble_bs_star(
    spaces: FlowSpaces, edge_exactness: int, volume_exactness: int
) -> sparse.csr_matrix:
    """b_h*(p, v) = Σ_{pr,B} (⟦v·n⟧, p)_e + Σ_Γ (v·n, p)_e − (p, div_h v)."""
    mesh = spaces.mesh
    sets = brinkman_edges(mesh)
    total = sparse.csr_matrix((spaces.hb.n_dofs, spaces.qb.n_dofs))
    interior = edge_quadrature(mesh, sets["primal_interior"], edge_exactness)
    total = total + edge_form(spaces.hb, JUMP, normal_component,
                              spaces.qb, AVERAGE, identity, interior)
    for name in ("boundary", "interface"):
        quad = edge_quadrature(mesh, sets[name], edge_exactness)
        total = total + edge_form(spaces.hb, ONE_SIDED, normal_component,
                                  spaces.qb, ONE_SIDED, identity, quad)
    vquad = volume_quadrature(spaces.hb, volume_exactness)
    div = spaces.hb.divergences(vquad.xi)[:, :, None, :]
    total = total + volume_form(spaces.hb, div, spaces.qb, spaces.qb.values(vquad.xi),
                                vquad.weights, scale=-1.0)
    return total.tocsr()


def assemble_bs_form(
    spaces: FlowSpaces, edge_exactness: int, volume_exactness: int
) -> sparse.csr_matrix:
    """b_h(u, q) = −Σ_dl (u·n, ⟦q⟧)_e + (u, ∇_h q)."""
    mesh = spaces.mesh
    dual = edge_quadrature(mesh, brinkman_edges(mesh)["dual"], edge_exactness)
    total = edge_form(spaces.qb, JUMP, identity, spaces.hb, AVERAGE, normal_component, dual,
                      scale=-1.0)
    quad = volume_quadrature(spaces.hb, volume_exactness)
    grads = spaces.qb.gradients(quad.xi)[:, :, 0, :, :]
    total = total + volume_form(spaces.qb, grads, spaces.hb, spaces.hb.values(quad.xi),
                                quad.weights)
    return total.tocsr()


def assemble_a_form(spaces: FlowSpaces, volume_exactness: int) -> sparse.csr_matrix:
    """A_h(v, p) = (p, div v) over Ω_D."""
    quad = volume_quadrature(spaces.hd, volume_exactness)
    div = spaces.hd.divergences(quad.xi)[:, :, None, :]
    return volume_form(spaces.hd, div, spaces.qd, spaces.qd.values(quad.xi), quad.weights)


def assemble_i_form(spaces: FlowSpaces, edge_exactness: int) -> sparse.csr_matrix:
    """I_h(p, v) = Σ_Γ (v·n_D, p)_e with n_D = −n_e on interface edges."""
    mesh = spaces.mesh
    quad = edge_quadrature(mesh, mesh.edges_of(EdgeKind.INTERFACE), edge_exactness)
    # interface edges: side 0 is the Brinkman subtriangle, side 1 the Darcy one
    return edge_form(spaces.hd, ((1, 1.0),), normal_component,
                     spaces.qb, ONE_SIDED, identity, quad, scale=-1.0)


def assemble_forms(
    mesh: StaggeredMesh,
    spaces: FlowSpaces,
    params: FlowParams,
    volume_exactness: int | None = None,
    edge_exactness: int | None = None,
) -> FlowForms:
    """Assemble every block of the flow system."""
    if spaces.mesh is not mesh:
        raise ConfigError("spaces were built on a different mesh", key="mesh")
    k = spaces.k
    volume_exactness = volume_exactness or 2 * k + 2
    edge_exactness = edge_exactness or 2 * k + 1
    forms = FlowForms(
        mass_l=mass_matrix(spaces.wb, volume_exactness, 1.0 / params.epsilon),
        b_star=assemble_b_star(spaces, edge_exactness, volume_exactness),
        b_form=assemble_b_form(spaces, edge_exactness, volume_exactness),
        mass_alpha=mass_matrix(spaces.hb, volume_exactness, params.alpha),
        bs_star=assemble_bs_star(spaces, edge_exactness, volume_exactness),
        bs_form=assemble_bs_form(spaces, edge_exactness, volume_exactness),
        mass_k=mass_matrix(spaces.hd, volume_exactness, inverse_coefficient(params.k_darcy)),
        a_form=assemble_a_form(spaces, volume_exactness),
        i_form=assemble_i_form(spaces, edge_exactness),
    )
    logger.debug(
        f"Assembled flow forms: |B - B*^T| = {abs(forms.b_form - forms.b_star.T).max():.2e}, "
        f"|b - b*^T| = {abs(forms.bs_form - forms.bs_star.T).max():.2e}"
    )
    return forms
