"""
Custom exceptions for wickstate.
"""

from __future__ import annotations


class WickStateError(Exception):
    """Base exception for all wickstate errors."""
    pass


class ConfigError(WickStateError):
    """Raised when there is a configuration error."""
    pass


class ScenarioError(WickStateError):
    """Raised when a scenario cannot be found or fails schema validation."""
    pass


class CheckNotFoundError(WickStateError):
    """Raised when a named check is not in the catalogue."""

    def __init__(self, name: str, suggestions: list[str] | None = None):
        self.name = name
        self.suggestions = suggestions or []
        hint = f" Did you mean: {', '.join(self.suggestions)}?" if self.suggestions else ""
        super().__init__(f"Unknown check '{name}'.{hint}")


class GridError(WickStateError):
    """Raised on invalid grid parameters, axes or shape mismatches."""
    pass


class SingularWeightError(WickStateError):
    """Raised when an inner-product weight or charge cannot be inverted."""
    pass


class NonPositiveMetricError(WickStateError):
    """Raised when a Riemannian metric field is not positive definite."""
    pass


class TruncationError(WickStateError):
    """Raised when a requested Taylor order exceeds the valid truncation order."""
    pass


class ChargeAssemblyError(WickStateError):
    """Raised when the charge identities fail after assembly."""
    pass


class CoercivityError(WickStateError):
    """Raised when a coercivity target cannot be reached."""
    pass


class AccretivityError(WickStateError):
    """Raised when the numerical range of an operator touches the imaginary axis."""
    pass


class FixedPointError(WickStateError):
    """Raised when the symbolic fixed point does not converge."""
    pass


class EvolutionError(WickStateError):
    """Raised when the Cauchy evolution step guard triggers."""
    pass


class EllipticSolveError(WickStateError):
    """Raised when the Dirichlet problem is singular or its data inconsistent."""
    pass


class GaugeFixError(WickStateError):
    """Raised when the boundary gauge-fixing system is singular."""
    pass


class MissingArtifactError(WickStateError):
    """Raised when a report is assembled without a required upstream stage."""

    def __init__(self, stage: str):
        self.stage = stage
        super().__init__(f"Missing upstream artifact from stage '{stage}'")


class StageError(WickStateError):
    """Raised when a pipeline stage fails numerically."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"Stage '{stage}' failed: {message}")
