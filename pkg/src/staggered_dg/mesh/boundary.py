"""Inflow/outflow classification of the outer boundary ∂Ω."""

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from staggered_dg.fem.quadrature import edge_rule, unit_interval
from staggered_dg.mesh.staggered import EdgeKind, StaggeredMesh

logger = logging.getLogger(__name__)

NormalData = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BoundaryFlow:
    """Per-quadrature-point normal velocity on the boundary edges of Ω.

    ``normal_flux`` is the prescribed u·n (falling back to u_h·n where nothing is
    prescribed) and ``inflow`` marks points with u·n < 0; u·n = 0 is outflow.
    """

    edges: np.ndarray
    s: np.ndarray
    points: np.ndarray  # (m, nq, 2)
    weights: np.ndarray  # (m, nq), physical
    normals: np.ndarray  # (m, 2) outward
    normal_flux: np.ndarray  # (m, nq)
    prescribed: np.ndarray  # (m, nq) bool
    inflow: np.ndarray  # (m, nq) bool

    @property
    def outflow(self) -> np.ndarray:
        return ~self.inflow

    def inflow_edges(self) -> np.ndarray:
        """Edges with at least one inflow quadrature point."""
        return self.edges[self.inflow.any(axis=1)]


def classify_boundary_flow(
    mesh: StaggeredMesh,
    normal_data: NormalData,
    exactness: int = 5,
    fallback: np.ndarray | None = None,
) -> BoundaryFlow:
    """Tag every ∂Ω quadrature point as inflow (u·n < 0) or outflow (u·n ≥ 0).

    ``normal_data`` returns NaN where no normal flux is prescribed; there the discrete
    normal velocity ``fallback`` (shape (m, nq)) is used, or 0 when it is absent.
    """
    edges = mesh.edges_of(EdgeKind.PRIMAL_BOUNDARY)
    s, w = unit_interval(edge_rule(exactness))
    points = mesh.edge_points(edges, s)
    normals = mesh.edge_normal[edges]
    flat_normals = np.broadcast_to(normals[:, None, :], points.shape).reshape(-1, 2)
    data = np.asarray(normal_data(points.reshape(-1, 2), flat_normals), dtype=float)
    data = np.broadcast_to(data, (points.shape[0] * points.shape[1],)).reshape(points.shape[:-1])
    prescribed = np.isfinite(data)
    if fallback is None:
        fallback = np.zeros(points.shape[:-1])
    normal_flux = np.where(prescribed, data, fallback)
    missing = ~prescribed.all(axis=1)
    if missing.any():
        logger.warning(
            f"{int(missing.sum())} boundary edges carry no normal-flux data; "
            f"using the discrete normal velocity there"
        )
    inflow = normal_flux < 0.0
    logger.debug(
        f"Boundary flow: {int(inflow.any(axis=1).sum())} of {len(edges)} edges with inflow"
    )
    return BoundaryFlow(
        edges=edges,
        s=s,
        points=points,
        weights=w[None, :] * mesh.edge_length[edges][:, None],
        normals=normals,
        normal_flux=normal_flux,
        prescribed=prescribed,
        inflow=inflow,
    )
