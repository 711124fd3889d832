"""
State definitions for the harmonic section flows and the run pipeline.

This module defines the structure fields, the flow state advanced by the
stepper, the stepper configuration, the per-sample diagnostics record and the
state that flows through the LangGraph run pipeline.

Production-grade features:
- Runtime type validation with clear error messages
- Field-level validation constraints
- Rich field metadata and documentation
- Enum-typed kinds, schemes, retractions and outcomes
"""

from enum import Enum
from typing import Annotated, Any, Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from infrastructure.config import get_config
from infrastructure.errors import DimensionMismatch
from infrastructure.g2 import G2Field
from infrastructure.grid import GridSpec, MatrixField, S3Homogeneous, ScalarField
from infrastructure.run_config import RunConfig


# ==================== Enums ====================

class FlowKind(str, Enum):
    PARALLELISM = "parallelism"
    ACS = "acs"
    ACTS = "acts"
    G2 = "g2"


class Scheme(str, Enum):
    EULER = "euler"
    RK4 = "rk4"


class RetractionMethod(str, Enum):
    POLAR = "polar"
    NONE = "none"


class RunOutcome(str, Enum):
    CONVERGED = "converged"
    MAX_STEPS = "max_steps"
    BLOWUP = "blowup"
    ERROR = "error"


# ==================== Structure fields ====================

class FrameField(MatrixField):
    """Orthonormal frames on T^3; column i of each 3 x 3 matrix is sigma_i."""

    rows: int = 3
    cols: int = 3

    @model_validator(mode="after")
    def check_base(self) -> "FrameField":
        if (self.rows, self.cols) != (3, 3) or self.grid.n != 3:
            raise DimensionMismatch("frame fields are 3 x 3 on a 3-dimensional grid")
        return self


class ACSField(MatrixField):
    """Almost complex structures J on T^{2m}, one 2m x 2m matrix per point."""

    @model_validator(mode="after")
    def check_base(self) -> "ACSField":
        if self.rows != self.cols or self.rows % 2 or self.rows != self.grid.n:
            raise DimensionMismatch(
                f"J must be square of even size equal to the base dimension, got "
                f"{self.rows} x {self.cols} on n = {self.grid.n}"
            )
        return self


class ACtSField(BaseModel):
    """Almost contact structures (xi, theta) on T^{2m+1}."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: GridSpec
    xi: np.ndarray = Field(description="Unit Reeb vector field, shape sizes + (2m+1,)")
    theta: np.ndarray = Field(description="Endomorphism field, shape sizes + (2m+1, 2m+1)")

    @field_validator("xi", "theta", mode="before")
    @classmethod
    def as_float_array(cls, v) -> np.ndarray:
        return np.asarray(v, dtype=float)

    @model_validator(mode="after")
    def check_shapes(self) -> "ACtSField":
        n = self.grid.n
        if n % 2 != 1 or n < 3:
            raise DimensionMismatch(f"almost contact structures need an odd base dimension >= 3, got {n}")
        if self.xi.shape != self.grid.sizes + (n,) or self.theta.shape != self.grid.sizes + (n, n):
            raise DimensionMismatch("xi and theta shapes must match the grid and base dimension")
        if not (np.all(np.isfinite(self.xi)) and np.all(np.isfinite(self.theta))):
            raise ValueError("xi and theta must be finite")
        return self

    @property
    def dim(self) -> int:
        return self.grid.n


StructureField = Union[FrameField, ACSField, ACtSField, G2Field, S3Homogeneous]


# ==================== Flow state ====================

class FlowState(BaseModel):
    """
    Time, structure field and cached densities of a running flow.

    `structure` is the field being evolved; `eps` and `kappa` cache the
    energy density 1/2|d^V sigma|^2 and kinetic density 1/2|tau^V|^2.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, validate_assignment=True)

    kind: Annotated[FlowKind, Field(description="Structure kind")]

    structure: Annotated[
        StructureField,
        Field(description="Structure field (frames, J, (xi, theta), phi or the S^3 frame)")
    ]

    t: Annotated[float, Field(default=0.0, description="Flow time")] = 0.0

    step: Annotated[int, Field(default=0, ge=0, description="Accepted steps so far")] = 0

    eps: Annotated[
        Optional[ScalarField],
        Field(default=None, description="Cached energy density")
    ] = None

    kappa: Annotated[
        Optional[ScalarField],
        Field(default=None, description="Cached kinetic density")
    ] = None

    @model_validator(mode="after")
    def check_kind(self) -> "FlowState":
        expected = {
            FlowKind.PARALLELISM: (FrameField, S3Homogeneous),
            FlowKind.ACS: (ACSField,),
            FlowKind.ACTS: (ACtSField,),
            FlowKind.G2: (G2Field,),
        }[self.kind]
        if not isinstance(self.structure, expected):
            raise ValueError(f"{self.kind.value} flow cannot hold a {type(self.structure).__name__}")
        return self

    @property
    def grid(self) -> GridSpec:
        if isinstance(self.structure, S3Homogeneous):
            return GridSpec(n=3, sizes=(1, 1, 1))
        return self.structure.grid

    @property
    def is_homogeneous(self) -> bool:
        return isinstance(self.structure, S3Homogeneous)


class StepperConfig(BaseModel):
    """Time-stepping parameters; unset tolerances fall back to the process configuration."""

    model_config = ConfigDict(validate_assignment=True)

    dt: Annotated[
        Optional[float],
        Field(default=None, gt=0.0, description="Timestep; None derives it from the CFL factor")
    ] = None

    scheme: Annotated[Scheme, Field(default=Scheme.RK4)] = Scheme.RK4

    cfl: Annotated[
        float,
        Field(default_factory=lambda: get_config().default_cfl, gt=0.0,
              description="Safety factor in dt <= cfl * h^2 / (2 n Lambda)")
    ]

    retraction: Annotated[
        Optional[RetractionMethod],
        Field(default=None, description="None picks the kind's default retraction")
    ] = None

    max_steps: Annotated[int, Field(default=1000, ge=0)] = 1000

    stop_tolerance: Annotated[
        float,
        Field(default=1e-8, ge=0.0, description="Converged when the sup norm of the tension drops below this")
    ] = 1e-8

    enforce_cfl: Annotated[
        bool,
        Field(default=True, description="Raise CflViolation when dt exceeds the stability bound")
    ] = True

    sample_interval: Annotated[int, Field(default=1, ge=1)] = 1

    repair_tol: Annotated[float, Field(default_factory=lambda: get_config().repair_tol, gt=0.0)]

    drift_tol: Annotated[float, Field(default_factory=lambda: get_config().drift_tol, gt=0.0)]

    blowup_factor: Annotated[float, Field(default_factory=lambda: get_config().blowup_factor, gt=1.0)]


# ==================== Diagnostics ====================

class DiagnosticsRecord(BaseModel):
    """One sample of the diagnostics stream."""

    model_config = ConfigDict(extra="forbid")

    t: float
    E: float = Field(ge=0.0, description="Dirichlet energy")
    K: float = Field(ge=0.0, description="Kinetic energy")
    eps_max: float = Field(ge=0.0, description="Sup of the energy density")
    constraint_drift: float = Field(ge=0.0)
    residual_harmonic_map: Optional[float] = Field(default=None, description="G2 only")
    entropy_F: Optional[float] = Field(default=None)

    @field_validator("t", "E", "K", "eps_max", "constraint_drift", "residual_harmonic_map", "entropy_F")
    @classmethod
    def check_finite(cls, v):
        if v is not None and not np.isfinite(v):
            raise ValueError("diagnostics values must be finite")
        return v


class RunHeader(BaseModel):
    """First line of the diagnostics stream: the resolution the energy identity tolerance is computed from."""

    model_config = ConfigDict(extra="forbid")

    kind: FlowKind
    h: float = Field(ge=0.0, description="Largest grid spacing over active axes; 0 for the S^3 model")
    dt: float = Field(gt=0.0, description="Resolved timestep")
    sample_interval: int = Field(ge=1)

    def as_line(self) -> Dict[str, Any]:
        return {"run": self.model_dump(mode="json")}


class FlowResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    records: List[DiagnosticsRecord]
    final_state: FlowState
    outcome: RunOutcome
    steps: int = Field(ge=0)
    message: str = ""
    header: RunHeader


# ==================== Run pipeline ====================

class RunState(BaseModel):
    """
    State that flows through the run pipeline graph.

    Only `config_path` is required; every other field is filled in by the nodes.
    """

    model_config = ConfigDict(
        extra="allow",
        validate_assignment=True,
        populate_by_name=True,
    )

    config_path: Annotated[str, Field(min_length=1, description="Path of the run configuration")]

    out_dir: Annotated[Optional[str], Field(default=None, description="Output directory override")] = None

    seed_override: Annotated[Optional[int], Field(default=None, ge=0)] = None

    quiet: Annotated[bool, Field(default=False)] = False

    run_config: Annotated[Optional[RunConfig], Field(default=None)] = None

    records: Annotated[List[DiagnosticsRecord], Field(default_factory=list)] = []

    reports: Annotated[List[Dict[str, Any]], Field(default_factory=list)] = []

    outcome: Annotated[str, Field(default="")] = ""

    steps: Annotated[int, Field(default=0, ge=0)] = 0

    dt: Annotated[Optional[float], Field(default=None, description="Resolved timestep")] = None

    header: Annotated[Optional[RunHeader], Field(default=None, description="Resolution of the run")] = None

    message: Annotated[str, Field(default="", description="Outcome detail")] = ""

    error: Annotated[str, Field(default="", description="Error message; empty on success")] = ""

    exit_code: Annotated[int, Field(default=0, ge=0, le=2)] = 0

    output_files: Annotated[List[str], Field(default_factory=list)] = []

    def has_error(self) -> bool:
        return bool(self.error)
