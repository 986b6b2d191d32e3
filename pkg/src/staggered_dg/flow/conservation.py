"""Strong mass conservation checks on a computed flow solution."""

import logging

import numpy as np

from staggered_dg.fem.assembly import edge_quadrature, volume_quadrature
from staggered_dg.fem.projection import (
    edge_projection_values,
    evaluate_cellwise,
    project_cellwise,
    project_edge,
)
from staggered_dg.fem.quadrature import triangle_rule
from staggered_dg.fem.spaces import FeSpace
from staggered_dg.flow.solver import FlowSolution
from staggered_dg.mesh.primal import Subdomain
from staggered_dg.mesh.staggered import EdgeKind
from staggered_dg.models.params import SpaceField
from staggered_dg.models.reports import ConservationReport

logger = logging.getLogger(__name__)


def _divergence_residual(
    sol: FlowSolution,
    space: FeSpace,
    coefficients: np.ndarray,
    source: SpaceField | None,
    exactness: int,
) -> float:
    """max over cells and points of |∇·u_h − 𝕡_h source|."""
    if len(space.tris) == 0:
        return 0.0
    xi = triangle_rule(exactness).points
    grads = space.evaluate_gradient(coefficients, xi)
    divergence = grads[:, :, 0, 0] + grads[:, :, 1, 1]
    if source is not None:
        k = space.degree
        projected = project_cellwise(source, sol.mesh, space.tris, k - 1)
        divergence = divergence - evaluate_cellwise(projected, k - 1, xi)
    return float(np.abs(divergence).max())


def velocity_scale(sol: FlowSolution, exactness: int = 4) -> float:
    """Largest |u_h| at volume quadrature points."""
    velocity = sol.velocity(triangle_rule(exactness).points)
    return float(np.linalg.norm(velocity, axis=-1).max()) if velocity.size else 0.0


def interface_flux_balance(sol: FlowSolution, exactness: int = 24) -> tuple[float, float]:
    """∫_Γ u_D,h·n_D and the data side ∫_{Γ_B} Π g1 − ∫_{Ω_B} g_B."""
    mesh = sol.mesh
    k = sol.spaces.k
    interface = edge_quadrature(mesh, mesh.edges_of(EdgeKind.INTERFACE), 2 * k + 1)
    flux = 0.0
    if len(interface.edges):
        # n_D = -n_e on Γ; side 1 is the Darcy subtriangle
        flux = -float(np.sum(interface.weights * sol.normal_velocity(interface.edges,
                                                                      interface.s, side=1)))
    gamma_b = mesh.edges_of(EdgeKind.PRIMAL_BOUNDARY, Subdomain.BRINKMAN)
    data = 0.0
    if len(gamma_b):
        quad = edge_quadrature(mesh, gamma_b, 2 * k + 1)
        moments = project_edge(sol.bdata.brinkman_flux, mesh, gamma_b, k, exactness)
        data = float(np.sum(quad.weights * edge_projection_values(moments, quad.s)))
    if sol.params.g_brinkman is not None:
        qb = sol.spaces.qb
        quad_v = volume_quadrature(qb, exactness)
        values = np.asarray(sol.params.g_brinkman(quad_v.points.reshape(-1, 2)), dtype=float)
        data -= float(np.sum(quad_v.weights * values.reshape(quad_v.weights.shape)))
    return flux, data


def verify_conservation(sol: FlowSolution, exactness: int = 24) -> ConservationReport:
    """Measure the four strong-conservation residuals of a flow solution."""
    mesh = sol.mesh
    spaces = sol.spaces
    k = spaces.k
    point_exactness = 2 * k + 2

    div_brinkman = _divergence_residual(sol, spaces.hb, sol.ub, sol.params.g_brinkman,
                                        point_exactness)
    div_darcy = _divergence_residual(sol, spaces.hd, sol.ud, sol.params.f_source,
                                     point_exactness)

    interface = mesh.edges_of(EdgeKind.INTERFACE)
    jump = 0.0
    if len(interface):
        quad = edge_quadrature(mesh, interface, 2 * k + 1)
        brinkman = sol.normal_velocity(interface, quad.s, side=0)
        darcy = sol.normal_velocity(interface, quad.s, side=1)
        jump = float(np.abs(brinkman - darcy).max())

    gamma_b = mesh.edges_of(EdgeKind.PRIMAL_BOUNDARY, Subdomain.BRINKMAN)
    boundary = 0.0
    if len(gamma_b):
        quad = edge_quadrature(mesh, gamma_b, 2 * k + 1)
        moments = project_edge(sol.bdata.brinkman_flux, mesh, gamma_b, k, exactness)
        discrete = sol.normal_velocity(gamma_b, quad.s, side=0)
        boundary = float(np.abs(discrete - edge_projection_values(moments, quad.s)).max())

    report = ConservationReport(
        div_brinkman_max=div_brinkman,
        interface_jump_max=jump,
        brinkman_flux_max=boundary,
        div_darcy_max=div_darcy,
        velocity_scale=velocity_scale(sol),
    )
    logger.info(
        f"Conservation: div uB {div_brinkman:.2e}, interface jump {jump:.2e}, "
        f"Γ_B flux {boundary:.2e}, div uD - f {div_darcy:.2e}"
    )
    return report
