"""Primal meshes, the staggered subdivision and boundary classification."""

from staggered_dg.mesh.primal import (
    BoundaryTag,
    CellKind,
    PrimalMesh,
    Rectangle,
    Subdomain,
    build_rectangular_primal,
    ladder_primal,
    validate_primal,
)
from staggered_dg.mesh.io import ingest_primal, step_interface_mesh, write_primal, write_step_mesh
from staggered_dg.mesh.staggered import EdgeKind, StaggeredMesh, subdivide
from staggered_dg.mesh.boundary import BoundaryFlow, classify_boundary_flow

__all__ = [
    "BoundaryFlow",
    "BoundaryTag",
    "CellKind",
    "EdgeKind",
    "PrimalMesh",
    "Rectangle",
    "StaggeredMesh",
    "Subdomain",
    "build_rectangular_primal",
    "classify_boundary_flow",
    "ingest_primal",
    "ladder_primal",
    "step_interface_mesh",
    "subdivide",
    "validate_primal",
    "write_primal",
    "write_step_mesh",
]
