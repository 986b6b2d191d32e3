"""Coupled Brinkman-Darcy flow: forms, solver and conservation checks."""

from staggered_dg.flow.conservation import (
    interface_flux_balance,
    velocity_scale,
    verify_conservation,
)
from staggered_dg.flow.forms import FlowForms, FlowSpaces, assemble_forms
from staggered_dg.flow.solver import (
    FlowSolution,
    SparseSolver,
    assemble_rhs,
    build_flow_spaces,
    compatibility_residual,
    lifting_correction,
    solve_flow,
    system_matrix,
)

__all__ = [
    "FlowForms",
    "FlowSolution",
    "FlowSpaces",
    "SparseSolver",
    "assemble_forms",
    "assemble_rhs",
    "build_flow_spaces",
    "compatibility_residual",
    "interface_flux_balance",
    "lifting_correction",
    "solve_flow",
    "system_matrix",
    "velocity_scale",
    "verify_conservation",
]
