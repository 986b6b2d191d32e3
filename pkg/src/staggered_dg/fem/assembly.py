"""Batched tabulation on subtriangles and edges plus COO scatter into sparse blocks."""

from collections.abc import Callable
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import sparse

from staggered_dg.fem.quadrature import edge_rule, triangle_rule, unit_interval
from staggered_dg.fem.spaces import FeSpace
from staggered_dg.mesh.staggered import StaggeredMesh


@dataclass(frozen=True)
class VolumeQuadrature:
    """Quadrature on the subtriangles of one space: reference points and physical data."""

    xi: np.ndarray  # (nq, 2)
    points: np.ndarray  # (ncell, nq, 2)
    weights: np.ndarray  # (ncell, nq), include |det J|


@dataclass(frozen=True)
class EdgeQuadrature:
    """Quadrature on a set of edges in the canonical edge parameter."""

    edges: np.ndarray
    s: np.ndarray  # (nq,)
    points: np.ndarray  # (m, nq, 2)
    weights: np.ndarray  # (m, nq), include h_e
    normals: np.ndarray  # (m, 2)
    tangents: np.ndarray  # (m, 2)


def volume_quadrature(space: FeSpace, exactness: int) -> VolumeQuadrature:
    rule = triangle_rule(exactness)
    mesh = space.mesh
    points = mesh.to_physical(space.tris, rule.points)
    weights = rule.weights[None, :] * (2.0 * mesh.areas[space.tris])[:, None]
    return VolumeQuadrature(rule.points, points, weights)


def edge_quadrature(mesh: StaggeredMesh, edges: np.ndarray, exactness: int) -> EdgeQuadrature:
    edges = np.asarray(edges, dtype=np.int64)
    s, w = unit_interval(edge_rule(exactness))
    points = mesh.edge_points(edges, s)
    weights = w[None, :] * mesh.edge_length[edges][:, None]
    return EdgeQuadrature(
        edges, s, points, weights, mesh.edge_normal[edges], mesh.edge_tangent[edges]
    )


def evaluate_coefficient(value: Any, points: np.ndarray) -> np.ndarray:
    """Values of a scalar or 2x2 coefficient at points (..., 2): shape (...) or (..., 2, 2)."""
    if callable(value):
        result = np.asarray(value(points.reshape(-1, 2)), dtype=float)
        if result.size == points[..., 0].size:
            return result.reshape(points.shape[:-1])
        return result.reshape(points.shape[:-1] + (2, 2))
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(points.shape[:-1], float(arr))
    return np.broadcast_to(arr, points.shape[:-1] + (2, 2)).copy()


def as_tensor(values: np.ndarray, leading: tuple[int, ...]) -> np.ndarray:
    """Promote scalar coefficient values of shape ``leading`` to (*leading, 2, 2)."""
    if values.shape == leading:
        return values[..., None, None] * np.eye(2)
    return values


def inverse_coefficient(value: Any) -> Any:
    """Inverse of a scalar, 2x2 or field coefficient (fields invert pointwise)."""
    if callable(value):

        def inverse(points: np.ndarray) -> np.ndarray:
            values = evaluate_coefficient(value, points)
            if values.shape == points.shape[:-1]:
                return 1.0 / values
            return np.linalg.inv(values)

        return inverse
    arr = np.asarray(value, dtype=float)
    return 1.0 / float(arr) if arr.ndim == 0 else np.linalg.inv(arr)


def evaluate_field(field: Callable[..., np.ndarray], points: np.ndarray, *args: Any) -> np.ndarray:
    """Evaluate a field on points (..., 2), keeping the leading shape."""
    flat = points.reshape(-1, 2)
    result = np.asarray(field(flat, *args), dtype=float)
    if result.ndim == 0:
        result = np.full(len(flat), float(result))
    return result.reshape(points.shape[:-1] + result.shape[1:])


def scatter_matrix(
    rows: np.ndarray, cols: np.ndarray, local: np.ndarray, shape: tuple[int, int]
) -> sparse.csr_matrix:
    """Sum local blocks (n, nr, nc) into a sparse matrix; negative DOFs are dropped."""
    r = np.broadcast_to(rows[:, :, None], local.shape).ravel()
    c = np.broadcast_to(cols[:, None, :], local.shape).ravel()
    v = local.ravel()
    keep = (r >= 0) & (c >= 0) & (v != 0.0)
    return sparse.coo_matrix((v[keep], (r[keep], c[keep])), shape=shape).tocsr()


def scatter_vector(dofs: np.ndarray, local: np.ndarray, size: int) -> np.ndarray:
    """Sum local vectors (n, nl) into a global vector; negative DOFs are dropped."""
    keep = dofs >= 0
    return np.bincount(dofs[keep], weights=local[keep], minlength=size).astype(float)


def mass_matrix(space: FeSpace, exactness: int, coefficient: Any = None) -> sparse.csr_matrix:
    """(A v, w) over the subtriangles of a space; A scalar, 2x2 (vector spaces) or field."""
    quad = volume_quadrature(space, exactness)
    values = space.values(quad.xi)  # (n, q, c, l)
    if coefficient is None:
        weighted = values
    else:
        coef = evaluate_coefficient(coefficient, quad.points)
        if coef.shape == quad.weights.shape:
            weighted = coef[:, :, None, None] * values
        else:
            weighted = np.einsum("nqcd,nqdl->nqcl", coef, values)
    local = np.einsum("nq,nqci,nqcj->nij", quad.weights, values, weighted)
    return scatter_matrix(space.dofs, space.dofs, local, (space.n_dofs, space.n_dofs))


def load_vector(
    space: FeSpace, field: Callable[[np.ndarray], np.ndarray], exactness: int
) -> np.ndarray:
    """(f, v) for a scalar or vector field matching the space's components."""
    quad = volume_quadrature(space, exactness)
    values = space.values(quad.xi)
    data = evaluate_field(field, quad.points).reshape(len(space.tris), len(quad.xi), -1)
    local = np.einsum("nq,nqc,nqcl->nl", quad.weights, data, values)
    return scatter_vector(space.dofs, local, space.n_dofs)
