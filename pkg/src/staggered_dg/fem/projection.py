"""Projections and interpolants onto the finite element spaces."""

import logging
from collections.abc import Callable

import numpy as np
from scipy.sparse.linalg import spsolve

from staggered_dg.exceptions import ConfigError
from staggered_dg.fem.assembly import (
    evaluate_field,
    load_vector,
    mass_matrix,
    volume_quadrature,
)
from staggered_dg.fem.basis import edge_legendre, reference_basis
from staggered_dg.fem.quadrature import edge_rule, triangle_rule, unit_interval
from staggered_dg.fem.spaces import FeSpace, SpaceKind
from staggered_dg.mesh.staggered import StaggeredMesh

logger = logging.getLogger(__name__)

EdgeFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


def project_edge(
    g: EdgeFunction, mesh: StaggeredMesh, edges: np.ndarray, k: int, exactness: int = 24
) -> np.ndarray:
    """Moments ∫_0^1 g ℓ_m ds of the piecewise L² projection onto P^k(e), shape (m, k+1).

    ``g`` receives points and the stored edge normals; the moments are taken against
    the Legendre polynomials orthonormal in the canonical edge parameter.
    """
    edges = np.asarray(edges, dtype=np.int64)
    s, w = unit_interval(edge_rule(exactness))
    points = mesh.edge_points(edges, s)
    normals = np.broadcast_to(mesh.edge_normal[edges][:, None, :], points.shape)
    values = np.asarray(g(points.reshape(-1, 2), normals.reshape(-1, 2)), dtype=float)
    values = np.broadcast_to(values, (points.shape[0] * points.shape[1],))
    values = values.reshape(points.shape[:-1])
    return np.einsum("mq,q,qj->mj", values, w, edge_legendre(s, k + 1))


def edge_projection_values(moments: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Evaluate projected edge data at canonical parameters s, shape (m, nq)."""
    return moments @ edge_legendre(s, moments.shape[1]).T


def project_cellwise(
    field: Callable[[np.ndarray], np.ndarray],
    mesh: StaggeredMesh,
    tris: np.ndarray,
    degree: int,
    exactness: int = 24,
) -> np.ndarray:
    """𝕡_h: coefficients (ntri, dim P^degree) in the orthonormal reference basis.

    The physical L² inner product is a constant multiple of the reference one on each
    subtriangle, so reference-orthonormal moments are the projection coefficients.
    """
    rule = triangle_rule(exactness)
    basis = reference_basis(degree)
    values = evaluate_field(field, mesh.to_physical(tris, rule.points))
    return np.einsum("nq,q,qj->nj", values, rule.weights, basis.values(rule.points))


def evaluate_cellwise(coefficients: np.ndarray, degree: int, xi: np.ndarray) -> np.ndarray:
    """Values (ntri, nq) of cellwise polynomials at reference points."""
    return coefficients @ reference_basis(degree).values(xi).T


def project_l2(
    field: Callable[[np.ndarray], np.ndarray], space: FeSpace, exactness: int = 24
) -> np.ndarray:
    """L²-orthogonal projection onto a space.

    Spaces whose DOFs are all cell-local (Q_h^D) are projected cell by cell; spaces with
    shared edge DOFs (U_h for initial data) need the global mass-matrix solve.
    """
    if np.all(space.dof_entity == 1):
        quad = volume_quadrature(space, exactness)
        values = space.values(quad.xi)
        data = evaluate_field(field, quad.points).reshape(len(space.tris), len(quad.xi), -1)
        local_mass = np.einsum("nq,nqci,nqcj->nij", quad.weights, values, values)
        local_load = np.einsum("nq,nqc,nqcl->nl", quad.weights, data, values)
        local = np.linalg.solve(local_mass, local_load[..., None])[..., 0]
        result = np.zeros(space.n_dofs)
        result[space.dofs] = local
        return result
    mass = mass_matrix(space, 2 * space.degree + 2)
    return np.asarray(spsolve(mass.tocsc(), load_vector(space, field, exactness)))


def _require(space: FeSpace, kinds: tuple[SpaceKind, ...], operator: str) -> None:
    if space.kind not in kinds:
        allowed = ", ".join(kind.value for kind in kinds)
        raise ConfigError(f"{operator} needs a space in ({allowed}), got {space.kind.value}",
                          key="space")


def interpolate_ih(
    q: Callable[[np.ndarray], np.ndarray], space: FeSpace, exactness: int | None = None
) -> np.ndarray:
    """I_h: primal-edge moments against P^k(e) and interior moments against P^{k-1}."""
    _require(space, (SpaceKind.QB, SpaceKind.UH), "I_h")
    return space.interpolate(q, exactness)


def interpolate_jh(
    v: Callable[[np.ndarray], np.ndarray], space: FeSpace, exactness: int | None = None
) -> np.ndarray:
    """J_h: dual-edge normal moments against P^k(e) and interior vector P^{k-1} moments."""
    _require(space, (SpaceKind.HB, SpaceKind.WH), "J_h")
    return space.interpolate(v, exactness)


def interpolate_bdm(
    v: Callable[[np.ndarray], np.ndarray], space: FeSpace, exactness: int | None = None
) -> np.ndarray:
    """Π^BDM: normal moments on edges, interior moments against ∇P^{k-1} and curl B^{k+1}."""
    _require(space, (SpaceKind.HD,), "Π^BDM")
    return space.interpolate(v, exactness)


def transfer(x: np.ndarray, source: FeSpace, target: FeSpace) -> np.ndarray:
    """DOFs of target applied to a discrete field of source on the same subtriangles.

    Exact when the source field lies in the target space (a BDM field on Ω_B is an
    element of H_h^B).
    """
    if not np.array_equal(source.tris, target.tris):
        raise ConfigError(
            f"cannot transfer {source.kind.value} to {target.kind.value}: different cells",
            key="space",
        )
    exactness = 2 * max(source.degree, target.degree) + 2
    result = np.zeros(target.n_dofs)
    for slot in target.slots:
        points, weights = target.functional_weights(slot, exactness)
        moments = np.einsum("nfqc,nqc->nf", weights, source.evaluate(x, points))
        valid = slot.dofs >= 0
        result[slot.dofs[valid]] = moments[valid]
    return result


def substitute_projection(
    field: Callable[[np.ndarray], np.ndarray],
    space: FeSpace,
    name: str,
    exactness: int = 24,
    tol: float = 1e-10,
) -> np.ndarray:
    """Project a source onto a discontinuous space, warning when it is not representable."""
    coefficients = project_l2(field, space, exactness)
    quad = volume_quadrature(space, exactness)
    exact = evaluate_field(field, quad.points).reshape(len(space.tris), len(quad.xi), -1)
    approx = space.evaluate(coefficients, quad.xi)
    gap = float(np.sqrt(np.sum(quad.weights[..., None] * (exact - approx) ** 2)))
    scale = float(np.sqrt(np.sum(quad.weights[..., None] * exact**2)))
    if gap > tol * max(scale, 1.0):
        logger.warning(
            f"Source {name} is not in {space.kind.value}; substituting its L2 projection "
            f"(relative gap {gap / max(scale, 1e-300):.3e})"
        )
    return coefficients
