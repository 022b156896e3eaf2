"""Pydantic schemas for experiment configuration and result reports."""

import math
from enum import Enum
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, Field, computed_field, field_validator, model_validator


class PropagationMethod(str, Enum):
    """Integrator for E'(s) = T L(s) E(s)."""

    EXPONENTIAL_MIDPOINT = "exponential_midpoint"
    MAGNUS4 = "magnus4"
    ADAPTIVE_RK = "adaptive_rk"


class BathKind(str, Enum):
    """Built-in bath spectral functions."""

    OHMIC = "ohmic"
    FLAT = "flat"
    TABULATED = "tabulated"


class CouplingAxis(str, Enum):
    Y = "y"
    Z = "z"


class CrossingMode(str, Enum):
    COUPLED = "coupled"
    DECOUPLED = "decoupled"


class ShiftMode(str, Enum):
    NONE = "none"
    GROUND_ENERGY = "ground_energy"


# ============================================================================
# Family and bath parameters
# ============================================================================


class BathSpec(BaseModel):
    """Thermal bath: inverse temperature plus a rate function gamma(omega)."""

    kind: BathKind = BathKind.OHMIC
    beta: float = Field(1.0, ge=0.0, description="Inverse temperature")
    eta: float = Field(1.0, gt=0.0, description="Ohmic coupling strength")
    cutoff: float = Field(8 * math.pi, gt=0.0, description="Exponential frequency cutoff")
    kappa: float = Field(1.0, ge=0.0, description="Flat-bath rate")
    points: list[tuple[float, float]] = Field(
        default_factory=list, description="(omega, gamma) samples for tabulated baths"
    )
    enforce_kms: bool = Field(
        True, description="Extend tabulated rates to omega < 0 by the KMS ratio"
    )
    lamb_shift_enabled: bool = True
    pv_radius: Optional[float] = Field(
        None, gt=0.0, description="Inner principal-value interval; defaults to a cutoff multiple"
    )

    @model_validator(mode="after")
    def _check_table(self) -> "BathSpec":
        if self.kind == BathKind.TABULATED:
            if len(self.points) < 2:
                raise ValueError("tabulated bath needs at least two (omega, gamma) points")
            if any(rate < 0 for _, rate in self.points):
                raise ValueError("tabulated rates must be nonnegative")
        if self.kind == BathKind.OHMIC and self.beta <= 0:
            raise ValueError("ohmic bath needs beta > 0")
        return self


class SyntheticCrossingSpec(BaseModel):
    """Qubit generator whose gap closes as v |s - s*|^alpha."""

    alpha: float = Field(1.0, gt=0.0)
    s_star: float = Field(1.0, ge=0.0, le=1.0)
    v: float = Field(1.0, gt=0.0, description="Rate prefactor")
    kappa: float = Field(1.0, gt=0.0, description="Dephasing rate of the gapped coherences")
    rotation: float = Field(0.5, description="Basis rotation angle swept over [0, 1]")
    mode: CrossingMode = CrossingMode.COUPLED
    population: float = Field(
        0.2, gt=0.0, lt=1.0, description="Excited population held fixed in decoupled mode"
    )


class FamilySpec(BaseModel):
    """A Liouvillian family selected by name with a parameter record."""

    name: str = Field(..., description="constant, example1, example2, unitary, synthetic_crossing, closed_system")
    parameters: dict[str, Any] = Field(default_factory=dict)


# ============================================================================
# Run configuration
# ============================================================================


class LadderSpec(BaseModel):
    """Log-spaced ladder of total evolution times."""

    T_min: float = Field(1e2, gt=0.0)
    T_max: float = Field(1e6, gt=0.0)
    count: int = Field(13, ge=2)

    @model_validator(mode="after")
    def _increasing(self) -> "LadderSpec":
        if self.T_max <= self.T_min:
            raise ValueError("T_max must exceed T_min")
        return self

    def values(self) -> list[float]:
        return [float(T) for T in np.logspace(np.log10(self.T_min), np.log10(self.T_max), self.count)]


class PropagatorConfig(BaseModel):
    """Integrator choice and step control."""

    method: PropagationMethod = PropagationMethod.EXPONENTIAL_MIDPOINT
    steps: Optional[int] = Field(None, ge=1, description="Initial substep count")
    tolerance: Optional[float] = Field(
        None, gt=0.0, description="Absolute Richardson / RK tolerance; default scales with T"
    )
    max_step_norm: Optional[float] = Field(None, gt=0.0)
    max_substeps: Optional[int] = Field(None, ge=1)


class ToleranceOverrides(BaseModel):
    """Per-experiment overrides of the global settings."""

    hermitian_tol: Optional[float] = None
    zero_tol: Optional[float] = None
    cluster_tol: Optional[float] = None
    reconstruction_tol: Optional[float] = None
    gap_threshold: Optional[float] = None
    fd_step: Optional[float] = None
    x_base_step: Optional[float] = None
    richardson_tol: Optional[float] = None
    ode_tol: Optional[float] = None
    euler_steps: Optional[int] = None
    bohr_tol: Optional[float] = None
    pv_tolerance: Optional[float] = None
    norm_restarts: Optional[int] = None
    norm_iterations: Optional[int] = None
    crossing_ratio: Optional[float] = None
    fit_window_fraction: Optional[float] = None
    bound_safety: Optional[float] = None

    def active(self) -> dict[str, Any]:
        return {key: value for key, value in self.model_dump().items() if value is not None}


class SpectrumSpec(BaseModel):
    s_min: float = Field(0.0, ge=0.0, le=1.0)
    s_max: float = Field(1.0, ge=0.0, le=1.0)
    points: int = Field(201, ge=2)


class BoundSpec(BaseModel):
    s: float = Field(1.0, gt=0.0, le=1.0)
    grid_points: Optional[int] = Field(None, ge=3)


class VerifySpec(BaseModel):
    checks: Optional[list[str]] = Field(None, description="Subset of checks to run; all when null")
    include_builtin: bool = Field(
        True, description="Run family-specific suites on a built-in family when the configured one does not apply"
    )
    bound_ladder: LadderSpec = Field(
        default_factory=lambda: LadderSpec(T_min=1e2, T_max=1e4, count=3)
    )


class ExperimentConfig(BaseModel):
    """Top-level JSON experiment configuration."""

    family: FamilySpec
    sweep: LadderSpec = Field(default_factory=LadderSpec)
    propagator: PropagatorConfig = Field(default_factory=PropagatorConfig)
    spectrum: SpectrumSpec = Field(default_factory=SpectrumSpec)
    bound: BoundSpec = Field(default_factory=BoundSpec)
    verify: VerifySpec = Field(default_factory=VerifySpec)
    fit_window: Optional[tuple[float, float]] = Field(
        None, description="[T_min, T_max] of the power-law fit; default is the top 40% in log T"
    )
    error_grid: Optional[list[float]] = Field(
        None, description="Extra s values at which the adiabatic error is reported"
    )
    outputs: str = Field("results", description="Output directory")
    tolerances: ToleranceOverrides = Field(default_factory=ToleranceOverrides)
    seed: int = 0

    @field_validator("error_grid")
    @classmethod
    def _grid_in_unit_interval(cls, grid: Optional[list[float]]) -> Optional[list[float]]:
        if grid is not None and any(not 0.0 < s <= 1.0 for s in grid):
            raise ValueError("error_grid values must lie in (0, 1]")
        return grid


# ============================================================================
# Diagnostics and reports
# ============================================================================


class CPTPDiagnostic(BaseModel):
    cp_violation: float
    tp_violation: float
    tol: float
    passed: bool


class GapReport(BaseModel):
    s: float
    gap: float = Field(..., ge=0.0)
    zero_multiplicity: int
    semisimple_defect: float


class DetailedBalanceReport(BaseModel):
    stationarity: float
    normality_defect: float


class NormEstimate(BaseModel):
    """Lower-bound estimate of an induced trace norm."""

    value: float
    certified: bool


class BoundReport(BaseModel):
    """The adiabatic constant C and its three contributions."""

    C: float
    contributions: list[float] = Field(..., min_length=3, max_length=3)
    norm_estimator_certified: bool
    s: float
    s_grid: list[float]
    sup_location: float
    gap_min: float
    resolvent_gap_constant: float = Field(..., description="max over the grid of ||S|| * gap")

    @model_validator(mode="after")
    def _sum_matches(self) -> "BoundReport":
        if not math.isclose(self.C, sum(self.contributions), rel_tol=1e-12, abs_tol=1e-300):
            raise ValueError("C must equal the sum of its contributions")
        return self


class Crossing(BaseModel):
    s_star: float
    alpha: float = Field(..., gt=0.0)
    v: float
    eta: float = Field(..., gt=0.0, le=1.0)


class CrossingReport(BaseModel):
    crossings: list[Crossing] = Field(default_factory=list)
    generic_multiplicity: int
    median_gap: float
    threshold: float


class PowerLawFit(BaseModel):
    """error ~ prefactor / T^exponent fitted in log-log."""

    prefactor: float
    exponent: float
    window: tuple[float, float]
    residual: float
    points: int


class TimeEstimate(BaseModel):
    """Sufficient evolution time for a thermal family."""

    T: float
    epsilon: float
    beta: float
    gap_min: float
    lprime_max: float
    h2_max: float
    c: float


class SpectrumRow(BaseModel):
    """One grid point of a spectrum scan; moduli follow continuous eigenvalue tracks."""

    s: float
    moduli: list[float]
    gap: float
    zero_multiplicity: int
    semisimple_defect: float


class BoundRow(BaseModel):
    T: float
    error: float
    bound: float = Field(..., description="C / T")
    holds: bool


class PPrimeSample(BaseModel):
    """Thermal bound on ||rho_G'||_1 against its finite-difference value at one s."""

    s: float
    bound: float
    measured: float

    @computed_field
    @property
    def holds(self) -> bool:
        return self.measured <= self.bound * (1.0 + 1e-9) + 1e-12


class Provenance(BaseModel):
    config_hash: str
    version: str
    tolerances: dict[str, Any]


class SweepRow(BaseModel):
    T: float
    error: float
    substeps: int
    richardson_discrepancy: Optional[float] = None
    flagged: bool = False
    message: str = ""
    grid_errors: Optional[list[float]] = None


class SweepResult(BaseModel):
    rows: list[SweepRow]
    fit: Optional[PowerLawFit] = None
    provenance: Provenance


class CheckOutcome(BaseModel):
    name: str
    passed: bool
    measured: Optional[float] = None
    threshold: Optional[float] = None
    detail: str = ""


class VerificationReport(BaseModel):
    checks: list[CheckOutcome]
    provenance: Provenance

    @computed_field
    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)
