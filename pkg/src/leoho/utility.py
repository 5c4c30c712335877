"""Per-UE utility functions: the alpha-fairness family.

Only point evaluation of the utility and its derivative is required by the
allocator, so any non-decreasing concave function could be plugged in here;
alpha-fairness is the single shipped instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UtilityDomainError, ValidationError


@dataclass(frozen=True)
class UtilitySpec:
    """Utility family applied to a UE's per-slot throughput (megabits).

    alpha spans utilitarian (0) to max-min (large) fairness; alpha=1 is the
    logarithmic proportional-fair point.
    """

    kind: str = "alpha_fair"
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind != "alpha_fair":
            raise ValidationError("utility.kind", f"unknown utility kind {self.kind!r}")
        if not (self.alpha >= 0.0) or not math.isfinite(self.alpha):
            raise ValidationError("utility.alpha", "alpha must be a finite real >= 0")


def utility(spec: UtilitySpec, d_mb: float) -> float:
    """u(d) = d^(1-alpha)/(1-alpha) for alpha != 1, log(d) for alpha = 1.

    d_mb = 0 is allowed only for alpha < 1 (u(0) = 0); for alpha >= 1 the
    value would be -inf, which the planner must never feed into a sum, so a
    loud domain error is raised instead.
    """
    a = spec.alpha
    if d_mb < 0.0 or (d_mb == 0.0 and a >= 1.0):
        raise UtilityDomainError(f"utility undefined for d={d_mb} with alpha={a}")
    if a == 1.0:
        return math.log(d_mb)
    return d_mb ** (1.0 - a) / (1.0 - a)


def utility_derivative(spec: UtilitySpec, d_mb: float) -> float:
    """u'(d) = d^(-alpha); equals 1 for the linear alpha=0 utility."""
    a = spec.alpha
    if a == 0.0:
        if d_mb < 0.0:
            raise UtilityDomainError(f"derivative undefined for d={d_mb}")
        return 1.0
    if d_mb <= 0.0:
        raise UtilityDomainError(f"derivative undefined for d={d_mb} with alpha={a}")
    return d_mb ** (-a)


def utility_array(spec: UtilitySpec, d_mb: np.ndarray) -> np.ndarray:
    """Vectorized `utility` over an array of throughputs."""
    a = spec.alpha
    d = np.asarray(d_mb, dtype=float)
    if np.any(d < 0.0) or (a >= 1.0 and np.any(d == 0.0)):
        raise UtilityDomainError(f"utility undefined for some d with alpha={a}")
    if a == 1.0:
        return np.log(d)
    return d ** (1.0 - a) / (1.0 - a)


def derivative_array(spec: UtilitySpec, d_mb: np.ndarray) -> np.ndarray:
    """Vectorized `utility_derivative` over an array of throughputs."""
    a = spec.alpha
    d = np.asarray(d_mb, dtype=float)
    if a == 0.0:
        if np.any(d < 0.0):
            raise UtilityDomainError("derivative undefined for negative d")
        return np.ones_like(d)
    if np.any(d <= 0.0):
        raise UtilityDomainError(f"derivative undefined for some d with alpha={a}")
    return d ** (-a)
