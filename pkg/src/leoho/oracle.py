"""Brute-force reference implementations.

These certify the optimized planner and allocator on small instances: full
enumeration of one UE's feasible serving sequences, and a grid search over
the allocation simplex. They live in the library (not only the test suite)
so the CLI can certify arbitrary small scenarios on demand.
"""

from __future__ import annotations

import itertools
from typing import TYPE_CHECKING

from .alloc import AllocationVector
from .errors import OracleCapError, ValidationError
from .planner import AssociationPlan, PlanObjective, evaluate_plan
from .utility import UtilitySpec, utility

if TYPE_CHECKING:
    from .channel import RateMatrix
    from .geometry import VisibilityMap
    from .scenario import Scenario

SEARCH_SPACE_CAP = 1_000_000


def _sequence_key(row: list[int], objective: float) -> tuple:
    """Total order matching the planner's tie-breaking.

    Minimize objective, then handover count, then prefer later handover
    boundaries (compared from the last one backwards), then lower satellite
    ids per segment (again from the last segment backwards).
    """
    boundaries = [t for t in range(len(row) - 1) if row[t] != row[t + 1]]
    seg_sats = [row[-1]] + [row[t] for t in reversed(boundaries)]
    return (
        objective,
        len(boundaries),
        tuple(-b for b in reversed(boundaries)),
        tuple(seg_sats),
    )


def brute_force_ue(
    ue: int,
    base: AssociationPlan,
    scenario: Scenario,
    vis: VisibilityMap,
    rates: RateMatrix,
) -> tuple[list[int], PlanObjective]:
    """Exhaustive search over one UE's feasible serving sequences.

    Every sequence is scored with evaluate_plan on the full plan; the
    minimum-objective sequence (under the planner's tie-break order) wins.
    """
    choices = [vis.sats(ue, t) for t in range(base.num_slots)]
    space = 1
    for c in choices:
        space *= len(c)
        if space > SEARCH_SPACE_CAP:
            raise OracleCapError(
                f"ue {ue}: search space exceeds cap {SEARCH_SPACE_CAP}"
            )
    best_key = None
    best_row: list[int] | None = None
    best_obj: PlanObjective | None = None
    trial = base.copy()
    for combo in itertools.product(*choices):
        row = list(combo)
        trial.serving[ue] = row
        obj = evaluate_plan(scenario, vis, rates, trial)
        key = _sequence_key(row, obj.objective)
        if best_key is None or key < best_key:
            best_key, best_row, best_obj = key, row, obj
    return best_row, best_obj


def brute_force_alloc(
    spec: UtilitySpec, dmax: dict[int, float], grid_step: float = 1e-3
) -> AllocationVector:
    """Grid search over the allocation simplex for up to three UEs.

    Grid-exact and independent of the allocator: shares walk the simplex at
    grid_step resolution and the summed utility is maximized directly.
    Points that would evaluate a zero share under alpha >= 1 are skipped.
    """
    ues = sorted(dmax)
    n = len(ues)
    if n == 0:
        return AllocationVector(shares={}, dual=float("nan"), served_set=())
    if n > 3:
        raise ValidationError("dmax", "grid oracle supports at most 3 UEs")
    steps = round(1.0 / grid_step)

    def value(shares: tuple[float, ...]) -> float | None:
        total = 0.0
        for ue, y in zip(ues, shares):
            d = y * dmax[ue]
            if d == 0.0 and spec.alpha >= 1.0:
                return None
            total += utility(spec, d)
        return total

    best_val = None
    best_shares: tuple[float, ...] | None = None
    if n == 1:
        best_shares = (1.0,)
        best_val = value(best_shares)
    elif n == 2:
        for a in range(steps + 1):
            shares = (a / steps, (steps - a) / steps)
            v = value(shares)
            if v is not None and (best_val is None or v > best_val):
                best_val, best_shares = v, shares
    else:
        for a in range(steps + 1):
            for b in range(steps + 1 - a):
                shares = (a / steps, b / steps, (steps - a - b) / steps)
                v = value(shares)
                if v is not None and (best_val is None or v > best_val):
                    best_val, best_shares = v, shares
    if best_shares is None:
        raise ValidationError("dmax", "no feasible grid point (alpha >= 1 needs interior points)")
    return AllocationVector(
        shares={ue: y for ue, y in zip(ues, best_shares)},
        dual=float("nan"),
        served_set=tuple(ues),
    )
