"""
Run-independent settings.

Values come from the defaults below, then the file named by ``WICKSTATE_CONFIG``
(JSON or YAML), then single-field ``WICKSTATE_<FIELD>`` environment variables.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path
from typing import Any, Dict, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

CONFIG_ENV = "WICKSTATE_CONFIG"
_ENV_PREFIX = "WICKSTATE_"


class WickStateConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    output_dir: Path = Field(default=Path("wickstate-out"), description="Default report directory")
    log_level: str = Field(default="INFO", description="Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)")
    log_file: Optional[Path] = Field(default=None, description="Optional path to log file")
    guard_order: int = Field(default=4, ge=0, description="Extra metric orders kept so derivatives stay valid to D")
    cheb_nodes: int = Field(default=48, ge=8, description="Chebyshev nodes per half-cylinder")
    fixed_point_max_iter: int = Field(default=40, ge=1, description="Iteration cap of the symbolic fixed point")
    regularizer_radius: float = Field(default=4.0, gt=0, description="Initial radius R of the regularizer")
    evolution_steps: int = Field(default=200, ge=1, description="Gauss-Legendre steps of the Cauchy evolution")
    smoothing_bound: float = Field(default=10.0, gt=0, description="Default constant bounding passing decay profiles")
    kernel_cutoff: float = Field(default=1e-10, gt=0, description="Singular-value cutoff of numerical kernels")
    wick_gauge_scale: float = Field(default=1.0, description="Scalar kappa in the Euclidean gauge map")
    trace_reversal: Literal["reflection", "literal"] = Field(
        default="reflection", description="Trace reversal coefficient convention away from dim 4"
    )
    jobs: int = Field(default=1, ge=1, description="Worker threads for independent checks")
    show_progress: bool = Field(default=True, description="Show tqdm progress bars")


_CONFIG: Optional[WickStateConfig] = None


def get_config() -> WickStateConfig:
    """Build the settings once per process and set up logging from them."""
    global _CONFIG
    if _CONFIG is not None:
        return _CONFIG

    data: Dict[str, Any] = {}
    env_path = os.getenv(CONFIG_ENV)
    if env_path and Path(env_path).exists():
        try:
            data = _load_config_file(Path(env_path))
        except Exception as e:
            print(f"Warning: Failed to load config from {env_path}: {e}", file=sys.stderr)
    data.update(_env_overrides())

    try:
        config = WickStateConfig(**data)
    except ValidationError as e:
        print(f"Warning: Failed to load config, using defaults: {e}", file=sys.stderr)
        config = WickStateConfig()

    from .logging import setup_logging
    setup_logging(level=config.log_level, log_file=config.log_file)

    _CONFIG = config
    return _CONFIG


def reset_config() -> None:
    """Forget the cached settings; the next get_config() reads them again."""
    global _CONFIG
    _CONFIG = None


def _env_overrides() -> Dict[str, str]:
    out = {}
    for name in WickStateConfig.model_fields:
        value = os.getenv(_ENV_PREFIX + name.upper())
        if value is not None:
            out[name] = value
    return out


def _load_config_file(config_path: Path) -> Dict[str, Any]:
    """
    Read a JSON or YAML settings file into a dict.

    Raises:
        ValueError: If the suffix is not supported or YAML is requested without PyYAML
        FileNotFoundError: If the file does not exist
    """
    if not config_path.exists():
        raise FileNotFoundError(f"Config file not found: {config_path}")

    suffix = config_path.suffix.lower()
    if suffix == ".json":
        with config_path.open(encoding="utf-8") as f:
            return json.load(f)
    if suffix in {".yaml", ".yml"}:
        try:
            import yaml
        except ImportError:
            raise ValueError("YAML config requires PyYAML. Install with: pip install wickstate[yaml]")
        with config_path.open(encoding="utf-8") as f:
            return yaml.safe_load(f) or {}
    raise ValueError(f"Unsupported config file format: {suffix}. Use .json or .yaml")
