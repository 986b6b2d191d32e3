"""Dual subdivision of a primal mesh into subtriangles with classified edges."""

import logging
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from staggered_dg.exceptions import MeshValidationError
from staggered_dg.mesh.primal import PrimalMesh, Subdomain, validate_primal

logger = logging.getLogger(__name__)

# Local edge i of a subtriangle (a, b, ν) runs between these local vertices;
# local edge 0 is the primal edge, 1 and 2 are dual edges.
LOCAL_EDGES = np.array([[0, 1], [1, 2], [2, 0]])
REFERENCE_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
LOCATE_TOL = 1e-12
LOCATE_CHUNK = 4096  # points per batch in locate


class EdgeKind(IntEnum):
    """Edge classes of the staggered mesh."""

    PRIMAL_INTERIOR = 0
    PRIMAL_BOUNDARY = 1
    DUAL = 2
    INTERFACE = 3


@dataclass(frozen=True)
class StaggeredMesh:
    """Subtriangles (a, b, ν) of the primal cells and the classified edge list.

    Subtriangles of Brinkman cells are numbered first. The normal of an interior edge
    points from its lower to its higher adjacent subtriangle; boundary and interface
    normals point out of the subdomain of ``edge_tris[:, 0]`` (out of Ω_B on Γ).
    """

    primal: PrimalMesh
    points: np.ndarray  # primal vertices followed by one center per primal cell
    tris: np.ndarray  # (ntri, 3) counter-clockwise (a, b, ν)
    tri_parent: np.ndarray
    tri_subdomain: np.ndarray
    tri_edges: np.ndarray  # (ntri, 3) edge id of local edge i
    tri_edge_sign: np.ndarray  # +1 where the stored normal is outward for this tri
    tri_edge_flip: np.ndarray  # True where the canonical edge direction opposes the local one
    edges: np.ndarray  # (nedge, 2) sorted point ids
    edge_kind: np.ndarray
    edge_tris: np.ndarray  # (nedge, 2), -1 for a missing side
    edge_local: np.ndarray  # (nedge, 2) local edge index in each side, -1 if missing
    edge_normal: np.ndarray
    edge_tangent: np.ndarray
    edge_length: np.ndarray
    jac: np.ndarray  # (ntri, 2, 2) columns b - a, ν - a
    jinv: np.ndarray
    areas: np.ndarray

    @property
    def n_tris(self) -> int:
        return len(self.tris)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def h(self) -> float:
        """Global meshsize: largest subtriangle diameter."""
        lengths = self.edge_length[self.tri_edges]
        return float(lengths.max())

    @property
    def centers(self) -> np.ndarray:
        """Interior point ν of every primal cell, indexed by primal cell id."""
        return self.points[self.primal.n_vertices :]

    @property
    def edge_subdomain(self) -> np.ndarray:
        """Subdomain of the first adjacent subtriangle (Brinkman for interface edges)."""
        return self.tri_subdomain[self.edge_tris[:, 0]]

    def tris_in(self, subdomain: Subdomain | None = None) -> np.ndarray:
        """Subtriangle ids of a subdomain (all when None)."""
        if subdomain is None:
            return np.arange(self.n_tris)
        return np.flatnonzero(self.tri_subdomain == int(subdomain))

    def edges_of(self, kind: EdgeKind, subdomain: Subdomain | None = None) -> np.ndarray:
        """Edge ids of a class, optionally restricted to the owning subdomain."""
        mask = self.edge_kind == int(kind)
        if subdomain is not None and kind is not EdgeKind.INTERFACE:
            mask &= self.edge_subdomain == int(subdomain)
        return np.flatnonzero(mask)

    def edge_patch(self, edge: int) -> np.ndarray:
        """D(e): the subtriangles adjacent to an edge."""
        sides = self.edge_tris[edge]
        return sides[sides >= 0]

    def edge_points(self, edges: np.ndarray, s: np.ndarray) -> np.ndarray:
        """Physical points at parameters s ∈ [0, 1] along canonical edge directions."""
        start = self.points[self.edges[edges, 0]]
        end = self.points[self.edges[edges, 1]]
        return start[:, None, :] + s[None, :, None] * (end - start)[:, None, :]

    def to_physical(self, tris: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """Map reference points (npts, 2) or (ntri, npts, 2) into subtriangles."""
        origin = self.points[self.tris[tris, 0]]
        if xi.ndim == 2:
            return origin[:, None, :] + np.einsum("tdr,qr->tqd", self.jac[tris], xi)
        return origin[:, None, :] + np.einsum("tdr,tqr->tqd", self.jac[tris], xi)

    def to_reference(self, tri: int, x: np.ndarray) -> np.ndarray:
        """Reference coordinates of physical points x (npts, 2) in one subtriangle."""
        origin = self.points[self.tris[tri, 0]]
        return (x - origin) @ self.jinv[tri].T

    def locate(self, x: np.ndarray) -> np.ndarray:
        """Subtriangle containing each point (first match), -1 if outside."""
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        result = np.full(len(x), -1, dtype=np.int64)
        origin = self.points[self.tris[:, 0]]
        lower = self.points[self.tris].min(axis=1) - LOCATE_TOL
        upper = self.points[self.tris].max(axis=1) + LOCATE_TOL
        for start in range(0, len(x), LOCATE_CHUNK):
            chunk = x[start : start + LOCATE_CHUNK]
            boxed = np.all((chunk[:, None, :] >= lower) & (chunk[:, None, :] <= upper), axis=2)
            points, tris = np.nonzero(boxed)
            xi = np.einsum("mrd,md->mr", self.jinv[tris], chunk[points] - origin[tris])
            inside = ((xi[:, 0] >= -LOCATE_TOL) & (xi[:, 1] >= -LOCATE_TOL)
                      & (xi.sum(axis=1) <= 1.0 + LOCATE_TOL))
            points, tris = points[inside], tris[inside]
            first = np.full(len(chunk), self.n_tris, dtype=np.int64)
            np.minimum.at(first, points, tris)
            result[start : start + len(chunk)] = np.where(first < self.n_tris, first, -1)
        return result


def subdivide(primal: PrimalMesh) -> StaggeredMesh:
    """Connect the center ν of every primal cell to its vertices."""
    validate_primal(primal)
    n_vertices = primal.n_vertices
    centers = np.array([primal.cell_points(c).mean(axis=0) for c in range(primal.n_cells)])
    points = np.vstack([primal.vertices, centers])

    order = np.argsort(primal.subdomains, kind="stable")
    tris: list[tuple[int, int, int]] = []
    parents: list[int] = []
    for cell in order:
        corners = primal.cells[cell]
        for i in range(len(corners)):
            tris.append((corners[i], corners[(i + 1) % len(corners)], n_vertices + int(cell)))
            parents.append(int(cell))
    tri_array = np.array(tris, dtype=np.int64)
    tri_parent = np.array(parents, dtype=np.int64)
    tri_subdomain = primal.subdomains[tri_parent].astype(np.int64)

    a = points[tri_array[:, 0]]
    jac = np.stack([points[tri_array[:, 1]] - a, points[tri_array[:, 2]] - a], axis=2)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    if np.any(det <= 0.0):
        bad = int(np.flatnonzero(det <= 0.0)[0])
        raise MeshValidationError("non-positive subtriangle area", cell=int(tri_parent[bad]))
    jinv = np.linalg.inv(jac)
    areas = 0.5 * det

    local = tri_array[:, LOCAL_EDGES]  # (ntri, 3, 2)
    keys = np.sort(local, axis=2).reshape(-1, 2)
    edges, inverse = np.unique(keys, axis=0, return_inverse=True)
    tri_edges = np.asarray(inverse).reshape(-1).reshape(-1, 3)
    tri_edge_flip = local[:, :, 0] != edges[tri_edges][:, :, 0]

    n_edges = len(edges)
    edge_tris = np.full((n_edges, 2), -1, dtype=np.int64)
    edge_local = np.full((n_edges, 2), -1, dtype=np.int64)
    for t in range(len(tri_array)):
        for i in range(3):
            e = tri_edges[t, i]
            side = 0 if edge_tris[e, 0] < 0 else 1
            if side == 1 and edge_tris[e, 1] >= 0:
                raise MeshValidationError("edge shared by more than two subtriangles",
                                          cell=int(tri_parent[t]))
            edge_tris[e, side] = t
            edge_local[e, side] = i

    two_sided = edge_tris[:, 1] >= 0
    dual = edges[:, 1] >= n_vertices
    edge_kind = np.full(n_edges, int(EdgeKind.PRIMAL_INTERIOR), dtype=np.int64)
    edge_kind[~two_sided] = int(EdgeKind.PRIMAL_BOUNDARY)
    edge_kind[dual] = int(EdgeKind.DUAL)
    cross = two_sided & ~dual
    interface = cross.copy()
    interface[cross] = tri_subdomain[edge_tris[cross, 0]] != tri_subdomain[edge_tris[cross, 1]]
    edge_kind[interface] = int(EdgeKind.INTERFACE)

    first = edge_tris[:, 0]
    first_local = edge_local[:, 0]
    start = points[tri_array[first, LOCAL_EDGES[first_local, 0]]]
    end = points[tri_array[first, LOCAL_EDGES[first_local, 1]]]
    direction = end - start
    edge_length = np.linalg.norm(direction, axis=1)
    edge_normal = np.stack([direction[:, 1], -direction[:, 0]], axis=1) / edge_length[:, None]
    edge_tangent = np.stack([-edge_normal[:, 1], edge_normal[:, 0]], axis=1)

    tri_edge_sign = np.where(edge_tris[tri_edges, 0] == np.arange(len(tri_array))[:, None], 1, -1)

    mesh = StaggeredMesh(
        primal=primal,
        points=points,
        tris=tri_array,
        tri_parent=tri_parent,
        tri_subdomain=tri_subdomain,
        tri_edges=tri_edges,
        tri_edge_sign=tri_edge_sign,
        tri_edge_flip=tri_edge_flip,
        edges=edges,
        edge_kind=edge_kind,
        edge_tris=edge_tris,
        edge_local=edge_local,
        edge_normal=edge_normal,
        edge_tangent=edge_tangent,
        edge_length=edge_length,
        jac=jac,
        jinv=jinv,
        areas=areas,
    )
    _check_invariants(mesh)
    logger.info(
        f"Subdivided {primal.n_cells} primal cells into {mesh.n_tris} subtriangles "
        f"and {mesh.n_edges} edges (h = {mesh.h:.4g})"
    )
    return mesh


def _check_invariants(mesh: StaggeredMesh) -> None:
    primal_area = mesh.primal.total_area()
    if abs(mesh.areas.sum() - primal_area) > 1e-12 * max(primal_area, 1.0):
        raise MeshValidationError("subtriangle areas do not sum to the primal area")
    dual = mesh.edges_of(EdgeKind.DUAL)
    sides = mesh.edge_tris[dual]
    if np.any(sides[:, 1] < 0) or np.any(
        mesh.tri_parent[sides[:, 0]] != mesh.tri_parent[sides[:, 1]]
    ):
        raise MeshValidationError("dual edge not shared by two subtriangles of one cell")
    interior = mesh.edges_of(EdgeKind.PRIMAL_INTERIOR)
    sides = mesh.edge_tris[interior]
    if np.any(mesh.tri_parent[sides[:, 0]] == mesh.tri_parent[sides[:, 1]]):
        raise MeshValidationError("primal edge shared within one primal cell")
