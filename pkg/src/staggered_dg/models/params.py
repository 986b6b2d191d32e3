"""Physical parameters, sources and boundary data."""

from collections.abc import Callable
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from staggered_dg.models.config import check_time_grid

# Spatial fields take points of shape (n, 2); time-dependent ones take (x, t).
SpaceField = Callable[[np.ndarray], np.ndarray]
SpaceTimeField = Callable[[np.ndarray, float], np.ndarray]
# Normal-flux data take points and the unit normals at those points.
FluxField = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _normalize_tensor(value: Any, name: str, *, allow_semidefinite: bool) -> Any:
    """Check a constant scalar/2x2 coefficient; callables are checked at assembly."""
    if callable(value):
        return value
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        scalar = float(arr)
        if scalar < 0.0 or (scalar == 0.0 and not allow_semidefinite):
            kind = "non-negative" if allow_semidefinite else "positive"
            raise ValueError(f"{name} must be {kind}")
        return scalar
    if arr.shape != (2, 2):
        raise ValueError(f"{name} must be a scalar or a 2x2 matrix")
    if not np.allclose(arr, arr.T):
        raise ValueError(f"{name} must be symmetric")
    lowest = float(np.linalg.eigvalsh(arr).min())
    if lowest < 0.0 or (lowest == 0.0 and not allow_semidefinite):
        raise ValueError(f"{name} eigenvalues must be {'>= 0' if allow_semidefinite else '> 0'}")
    return tuple(tuple(float(v) for v in row) for row in arr)


def _flatten(x: np.ndarray, normals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    return x.reshape(-1, 2), np.broadcast_to(normals, x.shape).reshape(-1, 2)


class FlowParams(BaseModel):
    """Coefficients and sources of the Brinkman-Darcy problem."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    epsilon: float = Field(1.0, gt=0.0, description="Effective viscosity")
    alpha: Any = Field(1.0, description="Brinkman drag: scalar, 2x2 or field")
    k_darcy: Any = Field(1.0, description="Hydraulic conductivity: scalar, 2x2 or field")
    f_brinkman: SpaceField | None = Field(None, description="Brinkman momentum source")
    f_darcy: SpaceField | None = Field(None, description="Darcy momentum source")
    f_source: SpaceField | None = Field(None, description="Darcy mass source f")
    g_brinkman: SpaceField | None = Field(None, description="Brinkman mass source (div u_B)")
    brinkman_lifting: SpaceField | None = Field(
        None, description="Smooth field w with div w = g_B, for a consistent Brinkman source"
    )

    @field_validator("alpha")
    @classmethod
    def _alpha_semidefinite(cls, value: Any) -> Any:
        return _normalize_tensor(value, "alpha", allow_semidefinite=True)

    @field_validator("k_darcy")
    @classmethod
    def _k_darcy_definite(cls, value: Any) -> Any:
        return _normalize_tensor(value, "k_darcy", allow_semidefinite=False)

    @model_validator(mode="after")
    def _lifting_needs_source(self) -> "FlowParams":
        if self.brinkman_lifting is not None and self.g_brinkman is None:
            raise ValueError("brinkman_lifting needs its divergence g_brinkman")
        return self


class BoundaryData(BaseModel):
    """Boundary data of flow and transport.

    Normal fluxes use the outward normal of the subdomain owning the edge. Γ_D edges
    selected by ``darcy_pressure_region`` carry the pressure ``darcy_pressure`` instead
    of a normal flux. ``brinkman_velocity`` switches Γ_B to full-velocity data.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    g1: FluxField | None = Field(None, description="Normal flux on Γ_B")
    g2: FluxField | None = Field(None, description="Normal flux on Γ_D")
    c_in: SpaceTimeField | None = Field(None, description="Inflow concentration")
    darcy_pressure: SpaceField | None = Field(None, description="Pressure on Γ_D segments")
    darcy_pressure_region: SpaceField | None = Field(
        None, description="Predicate selecting Γ_D pressure edges by midpoint"
    )
    brinkman_velocity: SpaceField | None = Field(
        None, description="Full velocity on Γ_B (experimental)"
    )

    @model_validator(mode="after")
    def _pressure_pairing(self) -> "BoundaryData":
        if (self.darcy_pressure is None) != (self.darcy_pressure_region is None):
            raise ValueError("darcy_pressure and darcy_pressure_region go together")
        return self

    @property
    def has_pressure_boundary(self) -> bool:
        """True when part of Γ_D carries a pressure condition."""
        return self.darcy_pressure is not None

    def brinkman_flux(self, x: np.ndarray, normals: np.ndarray) -> np.ndarray:
        """Prescribed u_B·n at points (..., 2) with outward normals of the same shape."""
        flat_x, flat_n = _flatten(x, normals)
        if self.brinkman_velocity is not None:
            velocity = np.asarray(self.brinkman_velocity(flat_x), dtype=float)
            values = np.einsum("nd,nd->n", velocity, flat_n)
        elif self.g1 is None:
            values = np.zeros(len(flat_x))
        else:
            values = np.broadcast_to(np.asarray(self.g1(flat_x, flat_n), dtype=float), len(flat_x))
        return values.reshape(x.shape[:-1])

    def darcy_flux(self, x: np.ndarray, normals: np.ndarray) -> np.ndarray:
        """Prescribed u_D·n on Γ_D flux points."""
        flat_x, flat_n = _flatten(x, normals)
        if self.g2 is None:
            return np.zeros(x.shape[:-1])
        values = np.broadcast_to(np.asarray(self.g2(flat_x, flat_n), dtype=float), len(flat_x))
        return values.reshape(x.shape[:-1])

    def is_pressure_edge(self, midpoints: np.ndarray) -> np.ndarray:
        """Mask of Γ_D edges (given by midpoints) carrying the pressure condition."""
        if self.darcy_pressure_region is None:
            return np.zeros(len(midpoints), dtype=bool)
        return np.asarray(self.darcy_pressure_region(midpoints), dtype=bool)


class TransportParams(BaseModel):
    """Coefficients, sources and time grid of the transport problem."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    k_diff: Any = Field(1.0, description="Diffusion-dispersion tensor K")
    porosity: Any = Field(1.0, description="Porosity φ: scalar or field")
    source: SpaceTimeField | None = Field(None, description="Source s(x, t)")
    c_hat: SpaceTimeField | None = Field(None, description="Injected concentration ĉ(x, t)")
    c_initial: SpaceField | None = Field(None, description="Initial concentration c⁰")
    darcy_source: SpaceField | None = Field(None, description="Darcy mass source f (split ±)")
    dt: float = Field(1e-3, gt=0.0, description="Time step")
    t_final: float = Field(0.1, gt=0.0, description="Final time")

    @field_validator("k_diff")
    @classmethod
    def _k_definite(cls, value: Any) -> Any:
        return _normalize_tensor(value, "k_diff", allow_semidefinite=False)

    @field_validator("porosity")
    @classmethod
    def _porosity_positive(cls, value: Any) -> Any:
        if callable(value):
            return value
        if float(value) <= 0.0:
            raise ValueError("porosity must be positive")
        return float(value)

    @model_validator(mode="after")
    def _time_grid(self) -> "TransportParams":
        check_time_grid(self.dt, self.t_final)
        return self

    @property
    def n_steps(self) -> int:
        """Number of backward Euler steps N = round(T/Δt)."""
        return int(round(self.t_final / self.dt))
