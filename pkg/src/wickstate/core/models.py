from __future__ import annotations

import json
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

SCHEMA_VERSION = "1"


class MetricSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    preset: str = Field(description="Metric preset name, see geometry.metrics.list_presets")
    params: Dict[str, Any] = Field(default_factory=dict)


class Scenario(BaseModel):
    """Validated run description; every numerical stage reads its knobs from here."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    schema_version: str = SCHEMA_VERSION
    name: str
    dim: int = Field(description="Spatial dimension d of the torus")
    n_per_axis: int
    metric: MetricSpec
    lambda_: float = Field(default=0.0, alias="lambda", description="Cosmological constant")
    taylor_order: int = Field(default=6, description="Working Taylor order D")
    T_half: float = Field(default=1.0, description="Half-length T of the Euclidean cylinder")
    s_nodes: Optional[int] = Field(default=None, description="Chebyshev nodes per half-cylinder")
    tolerances: Dict[str, float] = Field(default_factory=dict)
    seed: int = 0
    mass_squared: float = Field(default=0.0, description="m^2 added to the state-side operators")
    regularizer_radius: Optional[float] = None
    evolution_steps: Optional[int] = None
    t_window: float = Field(default=0.5, description="Time window of the Cauchy evolution checks")
    kernel_modes: int = Field(default=64, description="Cap on the kernel slice dimension")
    band_cutoff: float = Field(default=2.0, description="Integer wavenumber cutoff of test data")
    trace_reversal: Optional[Literal["reflection", "literal"]] = None
    wick_gauge_scale: Optional[float] = None

    @field_validator("dim")
    @classmethod
    def _dim(cls, v: int) -> int:
        if v not in (1, 2, 3):
            raise ValueError("dim must be 1, 2 or 3")
        return v

    @field_validator("n_per_axis")
    @classmethod
    def _even(cls, v: int) -> int:
        if v <= 0 or v % 2:
            raise ValueError("n_per_axis must be a positive even integer")
        return v

    @field_validator("T_half")
    @classmethod
    def _positive_T(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("T_half must be positive")
        return v

    @field_validator("taylor_order")
    @classmethod
    def _order(cls, v: int) -> int:
        if v < 2:
            raise ValueError("taylor_order must be at least 2")
        return v

    @field_validator("s_nodes")
    @classmethod
    def _nodes(cls, v: Optional[int]) -> Optional[int]:
        if v is not None and v < 4:
            raise ValueError("s_nodes must be at least 4")
        return v

    @field_validator("wick_gauge_scale")
    @classmethod
    def _kappa(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and v <= 0:
            raise ValueError("wick_gauge_scale must be positive")
        return v

    @property
    def Lambda(self) -> float:
        return self.lambda_

    def tolerance(self, check: str, default: float) -> float:
        return self.tolerances.get(check, default)


class CheckRecord(BaseModel):
    name: str
    anchor: str
    measured: float
    tolerance: float
    passed: bool
    informational: bool = False
    detail: Dict[str, Any] = Field(default_factory=dict)

    @classmethod
    def upper(
        cls, name: str, anchor: str, measured: float, tolerance: float,
        informational: bool = False, **detail: Any,
    ) -> "CheckRecord":
        """Check passing when ``measured <= tolerance``."""
        measured = float(measured)
        return cls(name=name, anchor=anchor, measured=measured, tolerance=tolerance,
                   passed=bool(measured <= tolerance), informational=informational, detail=detail)

    @classmethod
    def lower(
        cls, name: str, anchor: str, measured: float, tolerance: float,
        informational: bool = False, **detail: Any,
    ) -> "CheckRecord":
        """Check passing when ``measured >= -tolerance``."""
        measured = float(measured)
        return cls(name=name, anchor=anchor, measured=measured, tolerance=tolerance,
                   passed=bool(measured >= -tolerance), informational=informational, detail=detail)


class StageRecord(BaseModel):
    name: str
    status: Literal["ok", "failed", "skipped"]
    message: Optional[str] = None


class Report(BaseModel):
    schema_version: str = SCHEMA_VERSION
    tool_version: str
    scenario: Dict[str, Any]
    seed: int
    checks: List[CheckRecord] = Field(default_factory=list)
    decay_tables: Dict[str, Dict[str, Any]] = Field(default_factory=dict)
    stages: List[StageRecord] = Field(default_factory=list)
    timing: Dict[str, float] = Field(default_factory=dict, exclude=True)

    @property
    def failed_checks(self) -> List[CheckRecord]:
        return [c for c in self.checks if not c.passed and not c.informational]

    @property
    def passed(self) -> bool:
        return not self.failed_checks

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=True) + "\n"

    def to_yaml(self) -> str:
        try:
            import yaml
        except ImportError as e:
            raise ValueError("YAML reports require PyYAML. Install with: pip install 'wickstate[yaml]'") from e
        return yaml.safe_dump(self.to_dict(), sort_keys=True)
