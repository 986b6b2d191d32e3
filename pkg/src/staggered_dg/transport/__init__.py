"""Upwinding staggered DG transport with backward Euler time stepping."""

from staggered_dg.transport.forms import (
    TransportBlocks,
    TransportLoad,
    TransportSpaces,
    assemble_transport,
    assemble_transport_rhs,
    boundary_normal_data,
    build_transport_spaces,
)
from staggered_dg.transport.stepper import (
    StepDiagnostics,
    TransportRun,
    TransportState,
    initial_state,
    run_transport,
    step_backward_euler,
)

__all__ = [
    "StepDiagnostics",
    "TransportBlocks",
    "TransportLoad",
    "TransportRun",
    "TransportSpaces",
    "TransportState",
    "assemble_transport",
    "assemble_transport_rhs",
    "boundary_normal_data",
    "build_transport_spaces",
    "initial_state",
    "run_transport",
    "step_backward_euler",
]
