"""
Run configuration parsing and validation.

A run configuration is a flat, line-oriented `key = value` text file with
dotted section prefixes (a TOML-compatible subset):

    kind = "parallelism"
    geometry = "torus"
    grid.sizes = [16, 16, 16]
    initial.generator = "noise"
    initial.amplitude = 0.05
    stepper.scheme = "rk4"
    outputs.sample_interval = 10

Lines are read with python-dotenv and validated by the pydantic models below
before anything is allocated. Unknown keys are errors.
"""

from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from infrastructure.errors import ConfigError


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridSection(_Section):
    sizes: List[int] = Field(min_length=1, max_length=8)
    lengths: Optional[List[float]] = None


class InitialSection(_Section):
    generator: Literal["constant", "mode", "noise", "hopf", "constant_torsion"] = "constant"
    amplitude: float = Field(default=0.05, ge=0.0)
    axis: int = Field(default=0, ge=0)
    wavenumber: int = Field(default=1, ge=0)
    plane: Optional[List[int]] = Field(default=None, min_length=2, max_length=2,
                                       description="Rotation plane of the mode generator; defaults to (0, 2) or (0, 1)")
    direction: int = Field(default=0, ge=0, le=6, description="Vector e_i generating the G2 orbit direction")
    cutoff: int = Field(default=2, ge=1, description="Largest wavenumber of band-limited noise")
    seed: int = Field(default=1, ge=0)


class StepperSection(_Section):
    scheme: Literal["euler", "rk4"] = "rk4"
    dt: Optional[float] = Field(default=None, gt=0.0)
    cfl: Optional[float] = Field(default=None, gt=0.0)
    max_steps: int = Field(default=1000, ge=0)
    stop_tolerance: float = Field(default=1e-8, ge=0.0)
    enforce_cfl: bool = True


class OutputsSection(_Section):
    sample_interval: int = Field(default=1, ge=1)
    snapshot_interval: int = Field(default=0, ge=0, description="0 writes only the final snapshot")
    directory: Optional[str] = None


class DiagnosticsSection(_Section):
    energy_identity: bool = True
    blowup_fit: bool = True
    harmonic_residual: bool = True
    heat_fit: bool = True
    entropy: bool = False
    entropy_horizon: Optional[float] = Field(default=None, gt=0.0)
    entropy_center: Optional[List[float]] = None


class RunConfig(_Section):
    """Validated run configuration."""

    kind: Literal["parallelism", "acs", "acts", "g2"]
    geometry: Literal["torus", "s3"] = "torus"
    grid: Optional[GridSection] = None
    initial: InitialSection = Field(default_factory=InitialSection)
    stepper: StepperSection = Field(default_factory=StepperSection)
    outputs: OutputsSection = Field(default_factory=OutputsSection)
    diagnostics: DiagnosticsSection = Field(default_factory=DiagnosticsSection)

    @model_validator(mode="after")
    def check_consistency(self) -> "RunConfig":
        if self.geometry == "s3":
            if self.kind != "parallelism":
                raise ValueError("the S^3 geometry only supports the parallelism flow")
            if self.initial.generator not in ("hopf", "constant", "mode"):
                raise ValueError("S^3 runs use the hopf, constant or mode generator")
            if self.diagnostics.entropy:
                raise ValueError("the entropy functional is only defined on torus grids")
            return self
        if self.grid is None:
            raise ValueError("torus runs need grid.sizes")
        n = len(self.grid.sizes)
        if self.grid.lengths is not None and len(self.grid.lengths) != n:
            raise ValueError("grid.lengths must have one entry per axis")
        required = {"parallelism": n == 3, "acs": n % 2 == 0 and n >= 2,
                    "acts": n % 2 == 1 and n >= 3, "g2": n == 7}
        if not required[self.kind]:
            raise ValueError(f"grid of dimension {n} does not fit the {self.kind} flow")
        if self.initial.axis >= n:
            raise ValueError(f"initial.axis {self.initial.axis} out of range for {n} axes")
        plane = self.initial.plane
        if plane is not None and (plane[0] == plane[1] or max(plane) >= n or min(plane) < 0):
            raise ValueError(f"initial.plane {plane} must name two distinct axes below {n}")
        if self.initial.generator == "hopf":
            raise ValueError("the hopf generator needs geometry = s3")
        if self.initial.generator == "constant_torsion" and self.kind != "g2":
            raise ValueError("constant_torsion is a G2 generator")
        if self.diagnostics.entropy:
            if self.diagnostics.entropy_horizon is None:
                raise ValueError("diagnostics.entropy needs diagnostics.entropy_horizon")
            if self.diagnostics.entropy_center is not None and len(self.diagnostics.entropy_center) != n:
                raise ValueError("diagnostics.entropy_center needs one coordinate per axis")
        return self


def _parse_value(raw: str) -> Union[str, List[str]]:
    text = raw.strip()
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        if not inner:
            return []
        return [item.strip().strip("'\"") for item in inner.split(",")]
    return text.strip("'\"")


def parse_run_config(values: Dict[str, Optional[str]]) -> RunConfig:
    """
    Nest dotted keys and validate them.

    Args:
        values: Flat mapping of dotted keys to raw string values

    Returns:
        RunConfig

    Raises:
        ConfigError: on malformed keys, missing values or validation failures
    """
    nested: Dict[str, Any] = {}
    for key, raw in values.items():
        if raw is None:
            raise ConfigError(f"key '{key}' has no value")
        parts = key.split(".")
        if len(parts) > 2 or not all(parts):
            raise ConfigError(f"malformed key '{key}'")
        if len(parts) == 1:
            if isinstance(nested.get(parts[0]), dict):
                raise ConfigError(f"key '{key}' clashes with section '{parts[0]}'")
            nested[parts[0]] = _parse_value(raw)
            continue
        section = nested.setdefault(parts[0], {})
        if not isinstance(section, dict):
            raise ConfigError(f"key '{key}' clashes with top-level value '{parts[0]}'")
        section[parts[1]] = _parse_value(raw)
    try:
        return RunConfig(**nested)
    except ValidationError as e:
        raise ConfigError(f"invalid run configuration: {e}") from e


def load_run_config(path: Union[str, Path], seed_override: Optional[int] = None) -> RunConfig:
    """
    Read and validate a run configuration file.

    Args:
        path: Config file path
        seed_override: Replaces initial.seed when given

    Returns:
        RunConfig
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    config = parse_run_config(dotenv_values(path, interpolate=False))
    if seed_override is not None:
        initial = config.initial.model_copy(update={"seed": int(seed_override)})
        config = config.model_copy(update={"initial": initial})
    return config
