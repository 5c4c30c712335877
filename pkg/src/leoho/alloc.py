"""Per-(S-gNB, slot) resource-allocation subproblem.

Given the set of UEs served by one satellite in one slot and their maximum
achievable throughputs, split the unit resource budget to maximize the summed
utility. Alpha-fair utilities admit a closed form; a dual bisection search
covers any concave utility that only offers point evaluations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AllocationConvergenceError, ValidationError
from .utility import UtilitySpec, derivative_array, utility, utility_derivative

# Residual |sum(shares) - 1| above which bisection output is rejected instead
# of renormalized.
_RENORM_TOL = 1e-6


@dataclass(frozen=True)
class AllocationVector:
    """Resource shares for the UEs served by one satellite in one slot.

    dual is the common marginal utility at the optimum: every UE with a
    positive share satisfies u'(y*D)*D = dual.
    """

    shares: dict[int, float]
    dual: float
    served_set: tuple[int, ...]

    @property
    def total(self) -> float:
        return sum(self.shares.values())


EMPTY_ALLOCATION = AllocationVector(shares={}, dual=float("nan"), served_set=())


@dataclass(frozen=True)
class BisectionParams:
    """Tolerances and bounds for the dual bisection search.

    lambda bounds are auto-derived from the derivative at full share (min)
    and at the y_floor share (max) when left unset; a positive floor is
    required because alpha-fair derivatives diverge at zero.
    """

    epsilon: float = 1e-9
    lambda_min: float | None = None
    lambda_max: float | None = None
    y_floor: float = 1e-9

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValidationError("epsilon", "must be > 0")
        if self.y_floor <= 0.0:
            raise ValidationError("y_floor", "must be > 0")


@dataclass
class BisectionStats:
    outer_iterations: int = 0
    lambda_bounds: tuple[float, float] = (0.0, 0.0)
    inner_calls: int = 0
    residual: float = 0.0


def _check_dmax(dmax: dict[int, float]) -> None:
    for ue, d in dmax.items():
        if not (d > 0.0) or not math.isfinite(d):
            raise ValidationError("dmax", f"ue {ue}: throughput must be finite and > 0, got {d}")


def allocate_closed_form(alpha: float, dmax: dict[int, float]) -> AllocationVector:
    """Optimal alpha-fair shares: y_i proportional to D_i^((1-alpha)/alpha).

    The budget constraint is tight at the optimum, so shares sum to 1. For
    alpha=1 the exponent vanishes and every served UE gets an equal split.
    """
    if not dmax:
        return EMPTY_ALLOCATION
    if not (alpha > 0.0):
        raise ValidationError("alpha", "closed form requires alpha > 0")
    _check_dmax(dmax)
    served = tuple(sorted(dmax))
    expo = (1.0 - alpha) / alpha
    weights = [dmax[i] ** expo for i in served]
    total = sum(weights)
    shares = {i: w / total for i, w in zip(served, weights)}
    dual = total**alpha
    return AllocationVector(shares=shares, dual=dual, served_set=served)


def allocate_winner_take_all(dmax: dict[int, float]) -> AllocationVector:
    """alpha=0 rule: the full unit share goes to the max-throughput UE.

    Ties break to the lowest ue id. The closed form divides by a zero
    exponent at alpha=0 and bisection degenerates, hence the direct rule.
    """
    if not dmax:
        return EMPTY_ALLOCATION
    _check_dmax(dmax)
    served = tuple(sorted(dmax))
    winner = max(served, key=lambda i: (dmax[i], -i))
    shares = {i: (1.0 if i == winner else 0.0) for i in served}
    return AllocationVector(shares=shares, dual=dmax[winner], served_set=served)


def _inner_shares(
    spec: UtilitySpec,
    d: np.ndarray,
    lam: float,
    y_floor: float,
    tol: float,
) -> np.ndarray:
    """Solve u'(y*D)*D = lam per UE on [y_floor, 1] by bisection on y.

    The derivative of the slot utility w.r.t. the share is non-increasing in
    y, so: clamp to 1 when even the full share leaves marginal utility above
    lam, drop to 0 when the floor share is already below lam (the
    complementary-slackness branch), and bisect otherwise. Only point
    evaluations of the utility derivative are used.
    """
    g_full = derivative_array(spec, d) * d
    g_floor = derivative_array(spec, y_floor * d) * d
    y = np.empty_like(d)
    at_full = g_full >= lam
    at_zero = ~at_full & (g_floor <= lam)
    y[at_full] = 1.0
    y[at_zero] = 0.0
    mid_mask = ~(at_full | at_zero)
    if np.any(mid_mask):
        dm = d[mid_mask]
        lo = np.full(dm.shape, y_floor)
        hi = np.ones(dm.shape)
        iters = max(1, math.ceil(math.log2(1.0 / tol)))
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            too_high = derivative_array(spec, mid * dm) * dm > lam
            lo = np.where(too_high, mid, lo)
            hi = np.where(too_high, hi, mid)
        y[mid_mask] = 0.5 * (lo + hi)
    return y


def allocate_bisection(
    spec: UtilitySpec,
    dmax: dict[int, float],
    params: BisectionParams | None = None,
    *,
    return_stats: bool = False,
) -> AllocationVector | tuple[AllocationVector, BisectionStats]:
    """Dual bisection on lambda for general concave utilities.

    Halves [lambda_min, lambda_max] until its width drops below epsilon,
    steering on whether the induced shares exceed the unit budget. The final
    shares are renormalized to sum exactly 1 when the residual is below a
    small tolerance; a larger residual signals bad lambda bounds.
    """
    params = params or BisectionParams()
    stats = BisectionStats()
    if not dmax:
        return (EMPTY_ALLOCATION, stats) if return_stats else EMPTY_ALLOCATION
    _check_dmax(dmax)
    served = tuple(sorted(dmax))
    d = np.array([dmax[i] for i in served], dtype=float)

    g_full = derivative_array(spec, d) * d
    g_floor = derivative_array(spec, params.y_floor * d) * d
    lam_lo = params.lambda_min if params.lambda_min is not None else float(np.min(g_full))
    lam_hi = params.lambda_max if params.lambda_max is not None else float(np.max(g_floor))
    if not lam_lo < lam_hi:
        # Degenerate bracket (e.g. single UE with flat derivative): widen it.
        lam_hi = lam_lo + max(1.0, abs(lam_lo))
    stats.lambda_bounds = (lam_lo, lam_hi)

    max_iters = math.ceil(math.log2((lam_hi - lam_lo) / params.epsilon)) if lam_hi > lam_lo else 1
    lo, hi = lam_lo, lam_hi
    it = 0
    while hi - lo >= params.epsilon and it < max_iters + 2:
        mid = 0.5 * (lo + hi)
        y = _inner_shares(spec, d, mid, params.y_floor, params.epsilon)
        stats.inner_calls += 1
        if float(np.sum(y)) > 1.0:
            lo = mid
        else:
            hi = mid
        it += 1
    stats.outer_iterations = it
    if hi - lo >= params.epsilon:
        raise AllocationConvergenceError(
            f"bisection did not shrink below epsilon={params.epsilon} in {it} iterations"
        )

    lam_star = 0.5 * (lo + hi)
    y = _inner_shares(spec, d, lam_star, params.y_floor, params.epsilon)
    total = float(np.sum(y))
    residual = abs(total - 1.0)
    stats.residual = residual
    if residual > _RENORM_TOL:
        raise AllocationConvergenceError(
            f"share sum {total} too far from 1 (residual {residual:.3e}); bad lambda bounds?"
        )
    y = y / total
    shares = {i: float(v) for i, v in zip(served, y)}
    result = AllocationVector(shares=shares, dual=lam_star, served_set=served)
    return (result, stats) if return_stats else result


def subproblem_value(spec: UtilitySpec, dmax: dict[int, float], alloc: AllocationVector) -> float:
    """Summed utility of the allocation: sum_i u(share_i * dmax_i)."""
    missing = [i for i in alloc.served_set if i not in dmax]
    if missing:
        raise ValidationError("alloc", f"served UEs {missing} have no throughput entry")
    return sum(utility(spec, alloc.shares[i] * dmax[i]) for i in alloc.served_set)


def solve_subproblem(spec: UtilitySpec, dmax: dict[int, float]) -> tuple[AllocationVector, float]:
    """Optimal allocation and its value for one (satellite, slot) served set.

    Dispatch: alpha-fair with alpha > 0 uses the closed form, alpha = 0 the
    winner-take-all rule. The empty set solves to value 0.
    """
    if not dmax:
        return EMPTY_ALLOCATION, 0.0
    if spec.alpha == 0.0:
        alloc = allocate_winner_take_all(dmax)
    else:
        alloc = allocate_closed_form(spec.alpha, dmax)
    return alloc, subproblem_value(spec, dmax, alloc)


def marginal_dual(spec: UtilitySpec, share: float, d: float) -> float:
    """Marginal slot utility d/dy [u(y*D)] = u'(y*D)*D at a given share."""
    return utility_derivative(spec, share * d) * d
