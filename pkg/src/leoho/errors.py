"""Exception types shared across the package."""

from __future__ import annotations


class LeohoError(Exception):
    """Base class for all package errors."""


class ParseError(LeohoError):
    """A config or data file could not be parsed."""


class ValidationError(LeohoError):
    """A field violates an invariant. Carries the offending field name."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class InfeasibleError(LeohoError):
    """No admissible serving satellite exists for some (ue, slot)."""

    def __init__(self, ue: int, slot: int, message: str | None = None):
        detail = message or "no satellite meets the elevation threshold"
        super().__init__(f"ue={ue} slot={slot}: {detail}")
        self.ue = ue
        self.slot = slot


class UtilityDomainError(LeohoError):
    """Utility or derivative evaluated outside its domain."""


class AllocationConvergenceError(LeohoError):
    """Bisection failed to produce a near-feasible allocation (bad lambda bounds)."""


class OracleCapError(LeohoError):
    """Brute-force search space exceeds the configured cap."""
