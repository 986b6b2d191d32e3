"""Configuration models."""

from enum import Enum
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from staggered_dg.exceptions import ConfigError


class SolverSettings(BaseSettings):
    """Numerical settings from environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="STAGGERED_DG_", env_file=".env", extra="ignore", case_sensitive=False
    )

    log_level: str = "INFO"

    # Quadrature
    error_quadrature_extra: int = 2  # error norms use exactness 2k+2+extra
    data_quadrature_exactness: int = 24

    # Linear algebra
    solver_residual_tol: float = 1e-10
    refinement_steps: int = 3
    unisolvence_cond_max: float = 1e12

    # Checks
    compatibility_tol: float = 1e-10
    conservation_tol: float = 1e-9

    # Ladder runs
    ladder_workers: int = 1

    def volume_exactness(self, k: int) -> int:
        """Exactness of flow assembly rules on subtriangles."""
        return 2 * k + 2

    def edge_exactness(self, k: int) -> int:
        """Exactness of flow assembly rules on edges."""
        return 2 * k + 1

    def transport_volume_exactness(self, k: int) -> int:
        """Volume exactness for transport, high enough for the cubic energy terms."""
        return max(2 * k + 2, 3 * k)

    def transport_edge_exactness(self, k: int) -> int:
        """Edge exactness for transport."""
        return max(2 * k + 1, 3 * k)

    def error_exactness(self, k: int) -> int:
        """Exactness of rules used for L2 error norms."""
        return 2 * k + 2 + self.error_quadrature_extra


class Command(str, Enum):
    """Batch commands understood by the CLI."""

    CONVERGENCE = "convergence"
    SOLVE_FLOW = "solve-flow"
    RUN_TRANSPORT = "run-transport"
    DEMO = "demo"
    CHECK_MESH = "check-mesh"


CASE_IDS = ("ex1", "ex2", "ex3", "ex4")


class RunConfig(BaseModel):
    """Validated run configuration; keys mirror the CLI flags."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    command: Command = Field(..., description="Command to run")
    case: str | None = Field(None, description="Case id: ex1, ex2, ex3 or ex4")
    mesh: Path | None = Field(None, description="Primal mesh file (staggered-mesh v1)")
    k: int = Field(1, ge=1, le=3, description="Polynomial degree")
    ladder: list[int] = Field(
        default_factory=lambda: [2, 4, 8, 16, 32], description="Refinement ladder h^-1"
    )
    resolution: int = Field(8, ge=1, description="h^-1 for single solves and demos")
    # Parameter overrides; None keeps the case default.
    epsilon: float | None = Field(None, gt=0.0, description="Effective viscosity")
    alpha: float | None = Field(None, ge=0.0, description="Brinkman drag coefficient")
    kdiff: float | None = Field(None, gt=0.0, description="Diffusion-dispersion coefficient K")
    kdarcy: float | None = Field(None, gt=0.0, description="Hydraulic conductivity K_D")
    dt: float | None = Field(None, gt=0.0, description="Time step")
    tfinal: float | None = Field(None, gt=0.0, description="Final time")
    out: Path = Field(Path("out"), description="Output directory")
    dump_stride: int = Field(0, ge=0, description="Field dump stride in steps (0: snapshots only)")
    assert_checks: bool = Field(False, alias="assert", description="Fail on acceptance checks")
    times: list[float] | None = Field(None, description="Demo snapshot times")
    seed: int = Field(0, description="Seed of the random conductivity field")

    @field_validator("case")
    @classmethod
    def _known_case(cls, value: str | None) -> str | None:
        if value is not None and value not in CASE_IDS:
            raise ValueError(f"unknown case '{value}', expected one of {', '.join(CASE_IDS)}")
        return value

    @field_validator("ladder")
    @classmethod
    def _increasing_ladder(cls, value: list[int]) -> list[int]:
        if len(value) < 1 or any(n < 1 for n in value):
            raise ValueError("ladder entries must be positive integers")
        if any(b <= a for a, b in zip(value, value[1:], strict=False)):
            raise ValueError("ladder must be strictly increasing")
        return value

    @field_validator("times")
    @classmethod
    def _positive_times(cls, value: list[float] | None) -> list[float] | None:
        if value is not None and any(t < 0.0 for t in value):
            raise ValueError("snapshot times must be non-negative")
        return value

    @model_validator(mode="after")
    def _command_needs(self) -> "RunConfig":
        if self.dt is not None and self.tfinal is not None:
            check_time_grid(self.dt, self.tfinal)
        if self.command in (Command.CONVERGENCE, Command.SOLVE_FLOW, Command.RUN_TRANSPORT):
            if self.case is None:
                raise ValueError(f"command '{self.command.value}' needs a case")
        if self.command == Command.DEMO and self.case not in ("ex3", "ex4"):
            raise ValueError("demo runs case ex3 or ex4")
        if self.command == Command.CHECK_MESH and self.mesh is None:
            raise ValueError("check-mesh needs a mesh path")
        return self

    def value(self, name: str, default: float) -> float:
        """An override if given, otherwise the case default."""
        override = getattr(self, name)
        return default if override is None else float(override)

    def time_grid(self, default_dt: float, default_tfinal: float) -> tuple[float, float]:
        """(Δt, T) with case defaults filled in; raises ConfigError on a bad grid."""
        dt, tfinal = self.value("dt", default_dt), self.value("tfinal", default_tfinal)
        try:
            check_time_grid(dt, tfinal)
        except ValueError as e:
            raise ConfigError(str(e), key="tfinal") from e
        return dt, tfinal


def check_time_grid(dt: float, tfinal: float) -> int:
    """Number of steps round(T/Δt); T/Δt must be within 1% of an integer."""
    if tfinal < dt:
        raise ValueError("tfinal must be at least dt")
    ratio = tfinal / dt
    if abs(ratio - round(ratio)) > 0.01:
        raise ValueError(f"tfinal/dt = {ratio:.4f} is not within 1% of an integer")
    return int(round(ratio))


def _key_path(loc: tuple[Any, ...]) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def parse_config(path: Path | None = None, flags: dict[str, Any] | None = None) -> RunConfig:
    """Build a RunConfig from a YAML file and/or flag values (flags win)."""
    data: dict[str, Any] = {}
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text())
        except OSError as e:
            raise ConfigError(f"cannot read config file: {e}", key="config") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"malformed YAML: {e}", key="config") from e
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError("config file must contain a mapping", key="config")
        data.update({str(key).replace("-", "_"): value for key, value in loaded.items()})
    for key, value in (flags or {}).items():
        if value is not None:
            data[key] = value
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(first["msg"], key=_key_path(first["loc"])) from e
