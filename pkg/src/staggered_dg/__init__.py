"""
Staggered DG

Staggered discontinuous Galerkin solvers for coupled Brinkman-Darcy flow and
contaminant transport, with a manufactured-solution verification harness.
"""

__version__ = "0.1.0"

from staggered_dg.app import RunResult, SolverApp, create_app
from staggered_dg.exceptions import (
    AcceptanceError,
    ConfigError,
    MeshValidationError,
    SolverError,
    StaggeredDGError,
    UnisolvenceError,
)
from staggered_dg.models import RunConfig, SolverSettings, parse_config

__all__ = [
    "AcceptanceError",
    "ConfigError",
    "MeshValidationError",
    "RunConfig",
    "RunResult",
    "SolverApp",
    "SolverError",
    "SolverSettings",
    "StaggeredDGError",
    "UnisolvenceError",
    "__version__",
    "create_app",
    "parse_config",
]
