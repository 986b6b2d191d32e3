"""Quadrature, polynomial bases, finite element spaces and projections."""

from staggered_dg.fem.quadrature import QuadratureRule, edge_rule, triangle_rule
from staggered_dg.fem.basis import BubbleSpace, ReferenceBasis, ScalarBasis, dim_p
from staggered_dg.fem.spaces import FeSpace, SpaceKind, build_space
from staggered_dg.fem.projection import (
    interpolate_bdm,
    interpolate_ih,
    interpolate_jh,
    project_cellwise,
    project_edge,
    project_l2,
    transfer,
)

__all__ = [
    "BubbleSpace",
    "FeSpace",
    "QuadratureRule",
    "ReferenceBasis",
    "ScalarBasis",
    "SpaceKind",
    "build_space",
    "dim_p",
    "edge_rule",
    "interpolate_bdm",
    "interpolate_ih",
    "interpolate_jh",
    "project_cellwise",
    "project_edge",
    "project_l2",
    "transfer",
    "triangle_rule",
]
