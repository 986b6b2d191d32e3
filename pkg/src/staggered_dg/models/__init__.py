"""Data models for the staggered DG solver."""

from staggered_dg.models.config import Command, RunConfig, SolverSettings, parse_config
from staggered_dg.models.params import BoundaryData, FlowParams, TransportParams
from staggered_dg.models.reports import (
    ConservationReport,
    ErrorReport,
    ErrorRow,
    StabilityReport,
    StepRecord,
)

__all__ = [
    "BoundaryData",
    "Command",
    "ConservationReport",
    "ErrorReport",
    "ErrorRow",
    "FlowParams",
    "RunConfig",
    "SolverSettings",
    "StabilityReport",
    "StepRecord",
    "TransportParams",
    "parse_config",
]
