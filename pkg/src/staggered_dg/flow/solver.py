"""Assembly and direct solution of the coupled Brinkman-Darcy system."""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, onenormest, splu
from scipy.sparse.linalg import norm as sparse_norm

from staggered_dg.exceptions import ConfigError, SolverError
from staggered_dg.fem.assembly import (
    EdgeQuadrature,
    as_tensor,
    edge_quadrature,
    evaluate_coefficient,
    evaluate_field,
    inverse_coefficient,
    load_vector,
    mass_matrix,
    scatter_vector,
    volume_quadrature,
)
from staggered_dg.fem.projection import (
    evaluate_cellwise,
    project_cellwise,
    project_edge,
    substitute_projection,
    transfer,
)
from staggered_dg.fem.quadrature import triangle_rule
from staggered_dg.fem.spaces import DEFAULT_COND_MAX, FeSpace, SpaceKind, build_space
from staggered_dg.flow.forms import (
    FlowForms,
    FlowSpaces,
    Functional,
    assemble_forms,
    normal_component,
    tensor_normal,
)
from staggered_dg.mesh.primal import Subdomain
from staggered_dg.mesh.staggered import EdgeKind, StaggeredMesh
from staggered_dg.models.config import SolverSettings
from staggered_dg.models.params import BoundaryData, FlowParams

logger = logging.getLogger(__name__)

BLOCK_NAMES = ("L", "uB", "pB", "uD", "pD")


class SparseSolver:
    """LU factorization reused across right-hand sides, with iterative refinement."""

    def __init__(self, matrix: sparse.spmatrix, tol: float = 1e-10, refinement_steps: int = 3):
        self.matrix = sparse.csc_matrix(matrix)
        self.tol = tol
        self.refinement_steps = refinement_steps
        try:
            self._lu = splu(self.matrix)
        except RuntimeError as e:
            raise SolverError(f"sparse LU failed on a {self.matrix.shape[0]}-unknown system: {e}")

    def condition_estimate(self) -> float:
        """1-norm condition number estimate."""
        n = self.matrix.shape[0]
        inverse = LinearOperator(
            (n, n),
            matvec=self._lu.solve,
            rmatvec=lambda b: self._lu.solve(b, trans="T"),
            dtype=float,
        )
        return float(sparse_norm(self.matrix, 1) * onenormest(inverse))

    def solve(self, rhs: np.ndarray, step: int | None = None) -> tuple[np.ndarray, float]:
        """Solution and relative residual; raises SolverError above the tolerance."""
        rhs_norm = float(np.linalg.norm(rhs))
        if rhs_norm == 0.0:
            return np.zeros_like(rhs), 0.0
        x = self._lu.solve(rhs)
        residual = rhs - self.matrix @ x
        relative = float(np.linalg.norm(residual)) / rhs_norm
        for _ in range(self.refinement_steps):
            if relative <= self.tol * 1e-2:
                break
            x = x + self._lu.solve(residual)
            residual = rhs - self.matrix @ x
            relative = float(np.linalg.norm(residual)) / rhs_norm
        if not np.all(np.isfinite(x)) or not relative <= self.tol:
            raise SolverError(
                f"relative residual {relative:.3e} exceeds {self.tol:.1e} "
                f"(condition estimate {self.condition_estimate():.3e})",
                step=step,
            )
        return x, relative


def build_flow_spaces(
    mesh: StaggeredMesh,
    k: int,
    brinkman_velocity_mode: bool = False,
    cond_max: float = DEFAULT_COND_MAX,
) -> FlowSpaces:
    """W_h^B, H_h^B, Q_h^B, H_h^D and Q_h^D of degree k."""
    wb = build_space(SpaceKind.WB, mesh, k, free_brinkman_boundary=brinkman_velocity_mode,
                     cond_max=cond_max)
    spaces = FlowSpaces(
        mesh=mesh,
        k=k,
        wb=wb,
        hb=build_space(SpaceKind.HB, mesh, k, cond_max=cond_max),
        qb=build_space(SpaceKind.QB, mesh, k, cond_max=cond_max),
        hd=build_space(SpaceKind.HD, mesh, k, cond_max=cond_max),
        qd=build_space(SpaceKind.QD, mesh, k, cond_max=cond_max),
        brinkman_velocity_mode=brinkman_velocity_mode,
    )
    logger.info(
        "Flow DOFs: " + ", ".join(f"{n}={s}" for n, s in zip(BLOCK_NAMES, spaces.sizes))
    )
    return spaces


@dataclass
class FlowSolution:
    """Coefficient vectors of (L_h, u_B,h, p_B,h, u_D,h, p_D,h)."""

    spaces: FlowSpaces
    params: FlowParams
    bdata: BoundaryData
    l: np.ndarray
    ub: np.ndarray
    pb: np.ndarray
    ud: np.ndarray
    pd: np.ndarray
    multiplier: float
    residual: float
    pressure_edges: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def mesh(self) -> StaggeredMesh:
        return self.spaces.mesh

    def velocity(self, xi: np.ndarray) -> np.ndarray:
        """u_h at reference points of every subtriangle, shape (ntri, nq, 2)."""
        result = np.zeros((self.mesh.n_tris, len(xi), 2))
        result[self.spaces.hb.tris] = self.spaces.hb.evaluate(self.ub, xi)
        result[self.spaces.hd.tris] = self.spaces.hd.evaluate(self.ud, xi)
        return result

    def normal_velocity(self, edges: np.ndarray, s: np.ndarray, side: int = 0) -> np.ndarray:
        """u_h·n_e on one side of edges, shape (m, nq)."""
        edges = np.asarray(edges, dtype=np.int64)
        result = np.zeros((len(edges), len(s)))
        tris = self.mesh.edge_tris[edges, side]
        normals = self.mesh.edge_normal[edges]
        for space, coefficients in ((self.spaces.hb, self.ub), (self.spaces.hd, self.ud)):
            mask = np.isin(tris, space.tris)
            if mask.any():
                trace = space.evaluate_trace(coefficients, edges[mask], side, s)
                result[mask] = np.einsum("mqc,mc->mq", trace, normals[mask])
        return result

    def pressure_mean(self, exactness: int = 6) -> float:
        """∫_{Ω_B} p_B,h."""
        quad = volume_quadrature(self.spaces.qb, exactness)
        values = self.spaces.qb.evaluate(self.pb, quad.xi)[..., 0]
        return float(np.sum(quad.weights * values))


def darcy_boundary_split(mesh: StaggeredMesh, bdata: BoundaryData) -> tuple[np.ndarray, np.ndarray]:
    """Γ_D edges carrying a normal flux and Γ_D edges carrying a pressure."""
    edges = mesh.edges_of(EdgeKind.PRIMAL_BOUNDARY, Subdomain.DARCY)
    midpoints = mesh.edge_points(edges, np.array([0.5]))[:, 0, :]
    pressure = bdata.is_pressure_edge(midpoints) if len(edges) else np.zeros(0, dtype=bool)
    return edges[~pressure], edges[pressure]


def compatibility_residual(
    mesh: StaggeredMesh, params: FlowParams, bdata: BoundaryData, exactness: int = 24
) -> tuple[float, float]:
    """∫_{Γ_B} g1 + ∫_{Γ_D} g2 − ∫_{Ω_D} f − ∫_{Ω_B} g_B and its scale."""
    terms = []
    gb = edge_quadrature(mesh, mesh.edges_of(EdgeKind.PRIMAL_BOUNDARY, Subdomain.BRINKMAN),
                         exactness)
    terms.append(np.sum(gb.weights * bdata.brinkman_flux(gb.points, _edge_normals(gb))))
    gd = edge_quadrature(mesh, darcy_boundary_split(mesh, bdata)[0], exactness)
    terms.append(np.sum(gd.weights * bdata.darcy_flux(gd.points, _edge_normals(gd))))
    for source, subdomain in ((params.f_source, Subdomain.DARCY),
                              (params.g_brinkman, Subdomain.BRINKMAN)):
        if source is None:
            continue
        tris = mesh.tris_in(subdomain)
        rule = triangle_rule(exactness)
        values = evaluate_field(source, mesh.to_physical(tris, rule.points))
        weights = rule.weights[None, :] * (2.0 * mesh.areas[tris])[:, None]
        terms.append(-np.sum(weights * values))
    residual = float(sum(terms))
    scale = float(sum(abs(t) for t in terms))
    return residual, scale


EdgeData = Callable[[EdgeQuadrature], np.ndarray]


def scalar_trace(values: np.ndarray, quad: EdgeQuadrature) -> np.ndarray:
    return values


def edge_load(
    space: FeSpace, edges: np.ndarray, exactness: int, functional: Functional, data: EdgeData
) -> np.ndarray:
    """Σ_e ∫_e data · functional(test) on side 0; ``data`` returns (m, nq, r)."""
    result = np.zeros(space.n_dofs)
    if len(edges) == 0:
        return result
    quad = edge_quadrature(space.mesh, edges, exactness)
    values, dofs = space.trace(quad.edges, 0, quad.s)
    local = np.einsum("mq,mqr,mqrl->ml", quad.weights, data(quad), functional(values, quad))
    return scatter_vector(dofs, local, space.n_dofs)


def _edge_normals(quad: EdgeQuadrature) -> np.ndarray:
    return np.broadcast_to(quad.normals[:, None, :], quad.points.shape)


def assemble_rhs(
    spaces: FlowSpaces, params: FlowParams, bdata: BoundaryData, exactness: int = 24
) -> list[np.ndarray]:
    """Right-hand sides of the G, v_B, q_B, v_D and q_D equations."""
    mesh = spaces.mesh
    k = spaces.k
    gamma_b = mesh.edges_of(EdgeKind.PRIMAL_BOUNDARY, Subdomain.BRINKMAN)

    rhs_g = np.zeros(spaces.wb.n_dofs)
    if spaces.brinkman_velocity_mode and bdata.brinkman_velocity is not None:
        velocity = bdata.brinkman_velocity
        rhs_g = edge_load(spaces.wb, gamma_b, exactness, tensor_normal,
                          lambda q: evaluate_field(velocity, q.points))

    rhs_vb = np.zeros(spaces.hb.n_dofs)
    if params.f_brinkman is not None:
        rhs_vb = load_vector(spaces.hb, params.f_brinkman, exactness)

    def flux_g1(quad: EdgeQuadrature) -> np.ndarray:
        return bdata.brinkman_flux(quad.points, _edge_normals(quad))[..., None]

    rhs_qb = -edge_load(spaces.qb, gamma_b, exactness, scalar_trace, flux_g1)
    if params.g_brinkman is not None:
        coefficients = project_cellwise(params.g_brinkman, mesh, spaces.qb.tris, k - 1, exactness)
        quad = volume_quadrature(spaces.qb, exactness)
        projected = evaluate_cellwise(coefficients, k - 1, quad.xi)
        local = np.einsum("nq,nq,nql->nl", quad.weights, projected,
                          spaces.qb.values(quad.xi)[:, :, 0, :])
        rhs_qb += scatter_vector(spaces.qb.dofs, local, spaces.qb.n_dofs)

    rhs_vd = np.zeros(spaces.hd.n_dofs)
    if params.f_darcy is not None:
        k_inverse = inverse_coefficient(params.k_darcy)
        f_darcy = params.f_darcy

        def weighted(x: np.ndarray) -> np.ndarray:
            values = evaluate_field(f_darcy, x)
            coefficient = as_tensor(evaluate_coefficient(k_inverse, x), x.shape[:-1])
            return np.einsum("...cd,...d->...c", coefficient, values)

        rhs_vd = load_vector(spaces.hd, weighted, exactness)
    _, pressure_edges = darcy_boundary_split(mesh, bdata)
    if len(pressure_edges) and bdata.darcy_pressure is not None:
        pressure = bdata.darcy_pressure
        rhs_vd -= edge_load(spaces.hd, pressure_edges, exactness, normal_component,
                             lambda q: evaluate_field(pressure, q.points)[..., None])

    rhs_qd = np.zeros(spaces.qd.n_dofs)
    if params.f_source is not None:
        projected_f = substitute_projection(params.f_source, spaces.qd, "f", exactness)
        rhs_qd = mass_matrix(spaces.qd, 2 * k) @ projected_f
    return [rhs_g, rhs_vb, rhs_qb, rhs_vd, rhs_qd]


def lifting_correction(
    spaces: FlowSpaces,
    forms: FlowForms,
    lifting: Callable[[np.ndarray], np.ndarray],
    exactness: int = 24,
    cond_max: float = DEFAULT_COND_MAX,
) -> tuple[np.ndarray, np.ndarray]:
    """G and v_B load terms of a Brinkman lifting w with ∇·w = g_B.

    The q_B equation loads 𝕡_h g_B, which keeps u_B,h exactly H(div)-conforming but
    pins it to the BDM interpolant of w rather than to J_h w. With d = Π^BDM w − J_h w
    the terms −B_h*(d, G) and (α d, v) restore consistency of the G and v_B equations.
    """
    mesh = spaces.mesh
    bdm = build_space(SpaceKind.HD, mesh, spaces.k, subdomain=Subdomain.BRINKMAN,
                      cond_max=cond_max)
    conforming = transfer(bdm.interpolate(lifting, exactness), bdm, spaces.hb)
    gap = conforming - spaces.hb.interpolate(lifting, exactness)
    logger.debug(f"Brinkman lifting gap |Π^BDM w − J_h w| = {np.linalg.norm(gap):.3e}")
    return -(forms.b_star @ gap), forms.mass_alpha @ gap


def system_matrix(forms: FlowForms) -> sparse.csr_matrix:
    """Coupled block matrix: rows (G, v_B, q_B, v_D, q_D), columns (L, u_B, p_B, u_D, p_D)."""
    return sparse.bmat(
        [
            [forms.mass_l, -forms.b_star, None, None, None],
            [forms.b_form, forms.mass_alpha, forms.bs_star, None, None],
            [None, -forms.bs_form, None, -forms.i_form.T, None],
            [None, None, forms.i_form, forms.mass_k, -forms.a_form],
            [None, None, None, forms.a_form.T, None],
        ],
        format="csr",
    )


def solve_flow(
    mesh: StaggeredMesh,
    spaces: FlowSpaces,
    params: FlowParams,
    bdata: BoundaryData,
    settings: SolverSettings | None = None,
) -> FlowSolution:
    """Solve the discrete Brinkman-Darcy system with Γ_D flux lifting."""
    settings = settings or SolverSettings()
    if spaces.mesh is not mesh:
        raise ConfigError("spaces were built on a different mesh", key="mesh")
    if (bdata.brinkman_velocity is not None) != spaces.brinkman_velocity_mode:
        raise ConfigError(
            "full Brinkman velocity data needs spaces built in full-velocity mode", key="spaces"
        )
    if params.brinkman_lifting is not None and spaces.brinkman_velocity_mode:
        raise ConfigError(
            "a Brinkman lifting needs normal-flux data on Γ_B", key="brinkman_lifting"
        )
    exactness = settings.data_quadrature_exactness
    k = spaces.k
    flux_edges, pressure_edges = darcy_boundary_split(mesh, bdata)
    multiplier_needed = len(pressure_edges) == 0

    if multiplier_needed:
        residual, scale = compatibility_residual(mesh, params, bdata, exactness)
        if abs(residual) > settings.compatibility_tol * max(scale, 1.0):
            raise ConfigError(
                f"boundary data violate compatibility: residual {residual:.3e} "
                f"(scale {scale:.3e})",
                key="boundary",
            )

    forms = assemble_forms(
        mesh, spaces, params,
        volume_exactness=settings.volume_exactness(k),
        edge_exactness=settings.edge_exactness(k),
    )
    matrix = system_matrix(forms)
    rhs = np.concatenate(assemble_rhs(spaces, params, bdata, exactness))
    offsets = spaces.offsets
    if params.brinkman_lifting is not None:
        rhs_g, rhs_vb = lifting_correction(spaces, forms, params.brinkman_lifting, exactness,
                                           settings.unisolvence_cond_max)
        rhs[offsets[0] : offsets[1]] += rhs_g
        rhs[offsets[1] : offsets[2]] += rhs_vb

    # Lift the prescribed Γ_D normal moments out of the unknowns.
    fixed_local = spaces.hd.edge_dofs(flux_edges)
    fixed_values = np.zeros(len(fixed_local))
    if len(fixed_local):
        moments = project_edge(bdata.darcy_flux, mesh, flux_edges, k, exactness)
        edge_position = {int(e): i for i, e in enumerate(flux_edges)}
        rows = [edge_position[int(e)] for e in spaces.hd.dof_index[fixed_local]]
        fixed_values = moments[rows, spaces.hd.dof_moment[fixed_local]]
    fixed = offsets[3] + fixed_local
    n_total = matrix.shape[0]
    free = np.setdiff1d(np.arange(n_total), fixed)
    lifted = np.zeros(n_total)
    lifted[fixed] = fixed_values
    rhs_free = (rhs - matrix @ lifted)[free]
    reduced = matrix[free][:, free]

    if multiplier_needed:
        mean = np.zeros(n_total)
        mean[offsets[2] : offsets[3]] = load_vector(spaces.qb, lambda x: np.ones(len(x)), 4)
        column = sparse.csr_matrix(mean[free][:, None])
        reduced = sparse.bmat([[reduced, column], [column.T, None]], format="csc")
        rhs_free = np.concatenate([rhs_free, [0.0]])

    solver = SparseSolver(reduced, settings.solver_residual_tol, settings.refinement_steps)
    x_free, relative = solver.solve(rhs_free)
    multiplier = float(x_free[-1]) if multiplier_needed else 0.0
    x = lifted.copy()
    x[free] = x_free[: len(free)]
    blocks = [x[offsets[i] : offsets[i + 1]] for i in range(5)]
    solution = FlowSolution(
        spaces=spaces,
        params=params,
        bdata=bdata,
        l=blocks[0],
        ub=blocks[1],
        pb=blocks[2],
        ud=blocks[3],
        pd=blocks[4],
        multiplier=multiplier,
        residual=relative,
        pressure_edges=pressure_edges,
    )
    logger.info(
        f"Solved flow system: {len(free)} unknowns, relative residual {relative:.2e}, "
        f"multiplier {multiplier:.2e}"
    )
    return solution
