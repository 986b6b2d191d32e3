"""Finite element spaces as explicit DOF bases on the staggered mesh.

Every space is described by local moment functionals per subtriangle. Functionals on
an edge are shared by both adjacent subtriangles (they use the canonical edge
parameter and the stored normal), which is how the continuity constraints of a space
hold by construction. The local transform maps DOF values to coefficients in the
orthonormal reference basis.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass
from enum import Enum

import numpy as np

from staggered_dg.exceptions import ConfigError, UnisolvenceError
from staggered_dg.fem.basis import BubbleSpace, dim_p, edge_legendre, reference_basis
from staggered_dg.fem.quadrature import edge_rule, triangle_rule, unit_interval
from staggered_dg.mesh.primal import Subdomain
from staggered_dg.mesh.staggered import LOCAL_EDGES, REFERENCE_VERTICES, EdgeKind, StaggeredMesh

logger = logging.getLogger(__name__)

DEFAULT_COND_MAX = 1e12


class SpaceKind(str, Enum):
    """The seven spaces of the coupled scheme."""

    HB = "HB"  # Brinkman velocity
    WB = "WB"  # velocity gradient L
    QB = "QB"  # Brinkman pressure
    HD = "HD"  # Darcy velocity (BDM)
    QD = "QD"  # Darcy pressure
    UH = "UH"  # concentration
    WH = "WH"  # diffusive flux

    @property
    def subdomain(self) -> Subdomain | None:
        if self in (SpaceKind.HB, SpaceKind.WB, SpaceKind.QB):
            return Subdomain.BRINKMAN
        if self in (SpaceKind.HD, SpaceKind.QD):
            return Subdomain.DARCY
        return None

    @property
    def n_components(self) -> int:
        return {"WB": 4, "QB": 1, "QD": 1, "UH": 1}.get(self.value, 2)


@dataclass(frozen=True)
class _EdgeSlot:
    """Moments on local edge ``local`` of every subtriangle of the space."""

    local: int
    kind: str  # scalar | normal | gn | tangent
    count: int
    dofs: np.ndarray  # (ncell, count), -1 where the moment is fixed to zero


@dataclass(frozen=True)
class _InteriorSlot:
    kind: str  # moments | gradients | curls
    count: int
    dofs: np.ndarray


class FeSpace:
    """Global DOF map plus per-subtriangle DOF-to-coefficient transforms."""

    def __init__(
        self,
        kind: SpaceKind,
        mesh: StaggeredMesh,
        degree: int,
        tris: np.ndarray,
        slots: list[_EdgeSlot | _InteriorSlot],
        n_dofs: int,
        dof_entity: np.ndarray,
        dof_index: np.ndarray,
        dof_moment: np.ndarray,
        cond_max: float = DEFAULT_COND_MAX,
    ) -> None:
        self.kind = kind
        self.mesh = mesh
        self.degree = degree
        self.poly_degree = degree - 1 if kind is SpaceKind.QD else degree
        self.n_components = kind.n_components
        self.tris = tris
        self.cell_index = np.full(mesh.n_tris, -1, dtype=np.int64)
        self.cell_index[tris] = np.arange(len(tris))
        self.slots = slots
        self.n_dofs = n_dofs
        self.dof_entity = dof_entity
        self.dof_index = dof_index
        self.dof_moment = dof_moment
        self.reference = reference_basis(self.poly_degree)
        self.dofs = np.concatenate([slot.dofs for slot in slots], axis=1)

        matrix = self._functional_matrix()
        self.conditions = np.linalg.cond(matrix) if len(tris) else np.zeros(0)
        bad = np.flatnonzero(~np.isfinite(self.conditions) | (self.conditions > cond_max))
        if len(bad):
            t = int(tris[bad[0]])
            raise UnisolvenceError(kind.value, t, float(self.conditions[bad[0]]))
        transform = np.linalg.inv(matrix)
        self.transform = transform.reshape(len(tris), self.n_components, self.reference.dim, -1)

    # -- construction -------------------------------------------------------------

    @property
    def n_local(self) -> int:
        return self.dofs.shape[1]

    def _functional_matrix(self) -> np.ndarray:
        exactness = 2 * self.degree + 2
        blocks = []
        for slot in self.slots:
            points, weights = self.functional_weights(slot, exactness)
            values = self.reference.values(points)
            block = np.einsum("nfqc,qj->nfcj", weights, values)
            blocks.append(block.reshape(len(self.tris), slot.count, -1))
        return np.concatenate(blocks, axis=1)

    def functional_weights(
        self, slot: _EdgeSlot | _InteriorSlot, exactness: int
    ) -> tuple[np.ndarray, np.ndarray]:
        """Reference points (nq, 2) and weights (ncell, nf, nq, ncomp) of a slot."""
        if isinstance(slot, _EdgeSlot):
            return self._edge_weights(slot, exactness)
        return self._interior_weights(slot, exactness)

    def _edge_weights(self, slot: _EdgeSlot, exactness: int) -> tuple[np.ndarray, np.ndarray]:
        mesh = self.mesh
        s, w = unit_interval(edge_rule(exactness))
        a, b = LOCAL_EDGES[slot.local]
        va, vb = REFERENCE_VERTICES[a], REFERENCE_VERTICES[b]
        points = va + s[:, None] * (vb - va)
        m = self.degree + 1
        parity = (-1.0) ** np.arange(m)
        flips = mesh.tri_edge_flip[self.tris, slot.local]
        sign = np.where(flips[:, None], parity[None, :], 1.0)
        base = sign[:, :, None] * (w[:, None] * edge_legendre(s, m)).T[None, :, :]
        edges = mesh.tri_edges[self.tris, slot.local]
        normal = mesh.edge_normal[edges]
        tangent = mesh.edge_tangent[edges]
        nc, nq = len(self.tris), len(s)
        if slot.kind == "scalar":
            weights = base[..., None]
        elif slot.kind == "normal":
            weights = base[..., None] * normal[:, None, None, :]
        elif slot.kind == "gn":
            weights = np.zeros((nc, 2 * m, nq, 4))
            for i in range(2):
                for d in range(2):
                    weights[:, i * m : (i + 1) * m, :, 2 * i + d] = base * normal[:, None, None, d]
        elif slot.kind == "tangent":
            weights = np.zeros((nc, m, nq, 4))
            for i in range(2):
                for d in range(2):
                    coef = tangent[:, i] * normal[:, d]
                    weights[:, :, :, 2 * i + d] = base * coef[:, None, None]
        else:
            raise ValueError(f"unknown edge functional '{slot.kind}'")
        return points, weights

    def _interior_weights(
        self, slot: _InteriorSlot, exactness: int
    ) -> tuple[np.ndarray, np.ndarray]:
        rule = triangle_rule(exactness)
        points, w = rule.points, rule.weights
        nc, nq, ncomp = len(self.tris), len(w), self.n_components
        test = reference_basis(self.degree - 1)
        if slot.kind == "moments":
            psi = w[:, None] * test.values(points)  # (nq, nm)
            nm = psi.shape[1]
            weights = np.zeros((nc, ncomp * nm, nq, ncomp))
            for c in range(ncomp):
                weights[:, c * nm : (c + 1) * nm, :, c] = psi.T[None]
            return points, weights
        jinv = self.mesh.jinv[self.tris]
        if slot.kind == "gradients":
            grads = np.einsum("qmr,nrd->nqmd", test.gradients(points), jinv)[:, :, 1:, :]
            return points, np.einsum("q,nqfd->nfqd", w, grads)
        if slot.kind == "curls":
            curls = BubbleSpace(self.degree).curls(points, jinv)  # (nc, nq, nb, 2)
            return points, np.einsum("q,nqfd->nfqd", w, curls)
        raise ValueError(f"unknown interior functional '{slot.kind}'")

    # -- evaluation -----------------------------------------------------------------

    def local(self, tris: np.ndarray) -> np.ndarray:
        """Local cell indices of subtriangles; raises if one is outside the space."""
        index = self.cell_index[tris]
        if np.any(index < 0):
            raise ConfigError(f"subtriangle outside space {self.kind.value}", key="tris")
        return index

    def values(self, xi: np.ndarray, cells: np.ndarray | None = None) -> np.ndarray:
        """Local basis values at reference points, shape (ncell, nq, ncomp, nloc)."""
        transform = self.transform if cells is None else self.transform[cells]
        return np.einsum("qj,ncjl->nqcl", self.reference.values(xi), transform)

    def gradients(self, xi: np.ndarray, cells: np.ndarray | None = None) -> np.ndarray:
        """Physical gradients, shape (ncell, nq, ncomp, 2, nloc)."""
        cells = np.arange(len(self.tris)) if cells is None else cells
        jinv = self.mesh.jinv[self.tris[cells]]
        grads = np.einsum("qjr,nrd->nqjd", self.reference.gradients(xi), jinv)
        return np.einsum("nqjd,ncjl->nqcdl", grads, self.transform[cells])

    def divergences(self, xi: np.ndarray, cells: np.ndarray | None = None) -> np.ndarray:
        """Divergence of vector (ncell, nq, nloc) or row-wise of tensor fields (…, 2, nloc)."""
        grads = self.gradients(xi, cells)
        if self.n_components == 2:
            return grads[:, :, 0, 0, :] + grads[:, :, 1, 1, :]
        if self.n_components == 4:
            return np.stack(
                [grads[:, :, 0, 0, :] + grads[:, :, 1, 1, :],
                 grads[:, :, 2, 0, :] + grads[:, :, 3, 1, :]],
                axis=2,
            )
        raise ConfigError(f"divergence of scalar space {self.kind.value}", key="kind")

    def trace_points(
        self, edges: np.ndarray, side: int, s: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Cells and reference points (m, nq, 2) of canonical edge parameters s on one side."""
        mesh = self.mesh
        tris = mesh.edge_tris[edges, side]
        local_edge = mesh.edge_local[edges, side]
        flips = mesh.tri_edge_flip[tris, local_edge]
        s_local = np.where(flips[:, None], 1.0 - s[None, :], s[None, :])
        start = REFERENCE_VERTICES[LOCAL_EDGES[local_edge, 0]]
        end = REFERENCE_VERTICES[LOCAL_EDGES[local_edge, 1]]
        points = start[:, None, :] + s_local[:, :, None] * (end - start)[:, None, :]
        return self.local(tris), points

    def trace(
        self, edges: np.ndarray, side: int, s: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Basis traces (m, nq, ncomp, nloc) and DOFs (m, nloc) on one side of edges."""
        cells, points = self.trace_points(edges, side, s)
        values = np.einsum("mqj,mcjl->mqcl", self.reference.values(points), self.transform[cells])
        return values, self.dofs[cells]

    def local_values(self, x: np.ndarray) -> np.ndarray:
        """DOF values gathered per cell, shape (ncell, nloc); fixed-zero DOFs give 0."""
        x = np.asarray(x, dtype=float)
        return np.where(self.dofs >= 0, x[np.maximum(self.dofs, 0)], 0.0)

    def expand(self, x: np.ndarray) -> np.ndarray:
        """Local polynomial coefficients, shape (ncell, ncomp, dim)."""
        return np.einsum("ncjl,nl->ncj", self.transform, self.local_values(x))

    def evaluate(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """Field values at reference points of every cell, shape (ncell, nq, ncomp)."""
        return np.einsum("qj,ncj->nqc", self.reference.values(xi), self.expand(x))

    def evaluate_gradient(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """Field gradients, shape (ncell, nq, ncomp, 2)."""
        jinv = self.mesh.jinv[self.tris]
        grads = np.einsum("qjr,nrd->nqjd", self.reference.gradients(xi), jinv)
        return np.einsum("nqjd,ncj->nqcd", grads, self.expand(x))

    def evaluate_trace(
        self, x: np.ndarray, edges: np.ndarray, side: int, s: np.ndarray
    ) -> np.ndarray:
        """Field values on one side of edges, shape (m, nq, ncomp)."""
        values, dofs = self.trace(edges, side, s)
        local = np.where(dofs >= 0, np.asarray(x)[np.maximum(dofs, 0)], 0.0)
        return np.einsum("mqcl,ml->mqc", values, local)

    def edge_dofs(self, edges: np.ndarray) -> np.ndarray:
        """Global DOFs attached to the given edges (sorted)."""
        mask = (self.dof_entity == 0) & np.isin(self.dof_index, edges)
        return np.flatnonzero(mask)

    def interpolate(
        self, field: Callable[[np.ndarray], np.ndarray], exactness: int | None = None
    ) -> np.ndarray:
        """Apply every DOF functional to a field; shared DOFs take the last side's value."""
        exactness = exactness or 2 * self.degree + 4
        result = np.zeros(self.n_dofs)
        for slot in self.slots:
            points, weights = self.functional_weights(slot, exactness)
            physical = self.mesh.to_physical(self.tris, points)
            values = np.asarray(field(physical.reshape(-1, 2)), dtype=float)
            values = values.reshape(len(self.tris), len(points), self.n_components)
            moments = np.einsum("nfqc,nqc->nf", weights, values)
            valid = slot.dofs >= 0
            result[slot.dofs[valid]] = moments[valid]
        return result


def _edge_numbering(
    mesh: StaggeredMesh, tris: np.ndarray, slots: list[tuple[int, str, int, np.ndarray]]
) -> tuple[np.ndarray, np.ndarray, int]:
    """Offsets of edge DOFs; slots are (local, kind, count, carry mask over edges)."""
    counts = np.zeros(mesh.n_edges, dtype=np.int64)
    for local, _, count, carry in slots:
        edges = mesh.tri_edges[tris, local]
        counts[edges[carry[edges]]] = count
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
    return offsets, counts, int(counts.sum())


def build_space(
    kind: SpaceKind | str,
    mesh: StaggeredMesh,
    k: int,
    *,
    free_brinkman_boundary: bool = False,
    subdomain: Subdomain | None = None,
    cond_max: float = DEFAULT_COND_MAX,
) -> FeSpace:
    """Build one of the seven spaces of degree k on the mesh.

    ``free_brinkman_boundary`` makes the Gn moments of WB on Γ_B free DOFs (used when
    the full Brinkman velocity is prescribed on Γ_B). ``subdomain`` places the element on
    another subdomain than its own, as for the BDM lifting on Ω_B.
    """
    kind = SpaceKind(kind)
    if k < 1:
        raise ConfigError(f"degree k={k} unsupported, need k >= 1", key="k")
    if k > 3:
        raise ConfigError(f"degree k={k} unsupported, need k <= 3", key="k")
    tris = mesh.tris_in(kind.subdomain if subdomain is None else subdomain)
    every = np.ones(mesh.n_edges, dtype=bool)
    m = k + 1
    n_moments = dim_p(k - 1)

    edge_layout: list[tuple[int, str, int, np.ndarray]]
    interior: list[tuple[str, int]]
    if kind in (SpaceKind.QB, SpaceKind.UH):
        edge_layout = [(0, "scalar", m, every)]
        interior = [("moments", n_moments)]
    elif kind in (SpaceKind.HB, SpaceKind.WH):
        edge_layout = [(1, "normal", m, every), (2, "normal", m, every)]
        interior = [("moments", 2 * n_moments)]
    elif kind is SpaceKind.WB:
        carry = mesh.edge_kind == int(EdgeKind.PRIMAL_INTERIOR)
        if free_brinkman_boundary:
            carry |= mesh.edge_kind == int(EdgeKind.PRIMAL_BOUNDARY)
        edge_layout = [(0, "gn", 2 * m, carry), (1, "tangent", m, every), (2, "tangent", m, every)]
        interior = [("moments", 4 * n_moments)]
    elif kind is SpaceKind.HD:
        edge_layout = [(i, "normal", m, every) for i in range(3)]
        interior = [("gradients", n_moments - 1), ("curls", dim_p(k - 2))]
    else:  # QD
        edge_layout = []
        interior = [("moments", n_moments)]

    offsets, counts, n_edge_dofs = _edge_numbering(mesh, tris, edge_layout)
    slots: list[_EdgeSlot | _InteriorSlot] = []
    for local, functional, count, carry in edge_layout:
        edges = mesh.tri_edges[tris, local]
        dofs = offsets[edges][:, None] + np.arange(count)[None, :]
        dofs = np.where(carry[edges][:, None], dofs, -1)
        slots.append(_EdgeSlot(local, functional, count, dofs))

    n_cell_dofs = sum(count for _, count in interior)
    cell_base = n_edge_dofs + np.arange(len(tris))[:, None] * n_cell_dofs
    start = 0
    for functional, count in interior:
        if count == 0:
            continue
        dofs = cell_base + start + np.arange(count)[None, :]
        slots.append(_InteriorSlot(functional, count, dofs))
        start += count

    n_dofs = n_edge_dofs + len(tris) * n_cell_dofs
    dof_entity = np.concatenate([np.zeros(n_edge_dofs, dtype=np.int64),
                                 np.ones(len(tris) * n_cell_dofs, dtype=np.int64)])
    carrying = np.flatnonzero(counts)
    dof_index = np.concatenate([np.repeat(carrying, counts[carrying]),
                                np.repeat(tris, n_cell_dofs)]).astype(np.int64)
    dof_moment = np.concatenate([np.concatenate([np.arange(c) for c in counts[carrying]])
                                 if len(carrying) else np.zeros(0, dtype=np.int64),
                                 np.tile(np.arange(n_cell_dofs), len(tris))]).astype(np.int64)

    space = FeSpace(kind, mesh, k, tris, slots, n_dofs, dof_entity, dof_index, dof_moment, cond_max)
    logger.debug(
        f"Built {kind.value} (k={k}): {n_dofs} DOFs, max local condition "
        f"{space.conditions.max() if len(tris) else 0.0:.3e}"
    )
    return space
