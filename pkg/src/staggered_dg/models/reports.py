"""Report models for conservation, convergence and stability checks."""

import math

from pydantic import BaseModel, Field

ERROR_COLUMNS = ("L", "uB", "pB", "uD", "pD", "c", "z")


class ConservationReport(BaseModel):
    """Strong mass conservation residuals of a flow solution."""

    div_brinkman_max: float = Field(..., description="max over τ of |∇·u_B,h − 𝕡 g_B|")
    interface_jump_max: float = Field(..., description="max |⟦u_h·n⟧| at Γ quadrature points")
    brinkman_flux_max: float = Field(..., description="max |u_B,h·n − Π g1| on Γ_B")
    div_darcy_max: float = Field(..., description="max over τ of |∇·u_D,h − 𝕡 f|")
    velocity_scale: float = Field(1.0, description="Scale used by the pass/fail threshold")

    def worst(self) -> float:
        """Largest residual."""
        return max(
            self.div_brinkman_max,
            self.interface_jump_max,
            self.brinkman_flux_max,
            self.div_darcy_max,
        )

    def passes(self, tol: float) -> bool:
        """True when every residual is within tol times the velocity scale."""
        return self.worst() <= tol * max(self.velocity_scale, 1.0)


class ErrorRow(BaseModel):
    """Errors of one refinement level."""

    h: float
    errors: dict[str, float] = Field(default_factory=dict, description="L2 error per column")
    conservation: ConservationReport | None = None


def eoc(coarse_error: float, fine_error: float, coarse_h: float, fine_h: float) -> float:
    """Experimental order of convergence between two levels."""
    if coarse_error <= 0.0 or fine_error <= 0.0:
        return math.nan
    return math.log(coarse_error / fine_error) / math.log(coarse_h / fine_h)


class ErrorReport(BaseModel):
    """Convergence history over a refinement ladder, ordered by decreasing h."""

    case: str
    k: int = 1
    epsilon: float = 1.0
    kdiff: float = 1.0
    error_exactness: int = Field(..., description="Quadrature exactness of the error norms")
    rows: list[ErrorRow] = Field(default_factory=list)

    def orders(self, column: str) -> list[float | None]:
        """EOC per row for one column; None on the first row."""
        result: list[float | None] = [None]
        for prev, row in zip(self.rows, self.rows[1:], strict=False):
            if column not in prev.errors or column not in row.errors:
                result.append(None)
                continue
            result.append(eoc(prev.errors[column], row.errors[column], prev.h, row.h))
        return result[: len(self.rows)]

    def final_order(self, column: str) -> float | None:
        """EOC between the two finest levels."""
        values = self.orders(column)
        return values[-1] if len(values) > 1 else None


class StepRecord(BaseModel):
    """Per-step diagnostics of a transport run."""

    step: int
    t: float
    c_norm: float = Field(..., description="‖φ^{1/2} c_h‖₀")
    z_norm: float = Field(..., description="‖K^{-1/2} z_h‖₀")
    influx: float = Field(..., description="Boundary influx Δt-rate (c_in u·n over Γ_in)")
    outflux: float = Field(..., description="Boundary outflux rate")
    mass: float = Field(..., description="∫ φ c_h")
    ledger: float = Field(..., description="Relative mass-ledger residual of the step")
    energy_residual: float = Field(..., description="Discrete energy identity residual")


class StabilityReport(BaseModel):
    """Both sides of the fully discrete stability bound plus the per-step ledger."""

    lhs: float = Field(..., description="2Δt Σ‖K^{-1/2}z^{n+1}‖² + ‖φ^{1/2}c^N‖²")
    rhs: float = Field(..., description="Data side of the bound without the constant")
    records: list[StepRecord] = Field(default_factory=list)

    @property
    def ratio(self) -> float:
        """Measured ratio LHS/RHS."""
        return self.lhs / self.rhs if self.rhs > 0.0 else math.inf if self.lhs > 0.0 else 0.0

    def max_ledger(self) -> float:
        """Largest per-step relative ledger residual."""
        return max((abs(r.ledger) for r in self.records), default=0.0)

    def max_energy_residual(self) -> float:
        """Largest per-step energy identity residual."""
        return max((abs(r.energy_residual) for r in self.records), default=0.0)
