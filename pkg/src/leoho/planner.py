"""Coordinated handover planning.

The driver alternates over UEs; for each UE a dynamic program over
(last-handover slot, serving satellite) segments finds the row that
minimizes handover count minus gamma-weighted aggregate utility, holding
every other UE's associations fixed. Each sweep can only improve the
objective, so the iteration converges to a local optimum.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, TextIO

import numpy as np

from .alloc import solve_subproblem
from .errors import InfeasibleError, ValidationError

if TYPE_CHECKING:
    from .channel import RateMatrix
    from .geometry import VisibilityMap
    from .scenario import Scenario


@dataclass(eq=True)
class AssociationPlan:
    """Per-UE serving-satellite sequence over the planning interval."""

    num_slots: int
    serving: dict[int, list[int]]

    def copy(self) -> AssociationPlan:
        return AssociationPlan(self.num_slots, {ue: list(row) for ue, row in self.serving.items()})

    def ue_ids(self) -> list[int]:
        return sorted(self.serving)

    def handovers(self, ue: int) -> int:
        row = self.serving[ue]
        return sum(1 for t in range(len(row) - 1) if row[t] != row[t + 1])

    def handover_events(self) -> list[tuple[int, int, int, int]]:
        """(ue, slot, src_sat, tgt_sat) per event; slot is where the new server starts."""
        events = []
        for ue in self.ue_ids():
            row = self.serving[ue]
            for t in range(len(row) - 1):
                if row[t] != row[t + 1]:
                    events.append((ue, t + 1, row[t], row[t + 1]))
        return events


@dataclass(frozen=True)
class PlanObjective:
    """Objective decomposition: handover count minus gamma-weighted utility."""

    n_ho: int
    u_ue: float
    objective: float
    per_slot_utility: tuple[float, ...]
    per_ue_handovers: dict[int, int]


def check_feasible(vis: VisibilityMap, plan: AssociationPlan) -> None:
    for ue, row in plan.serving.items():
        if len(row) != plan.num_slots:
            raise ValidationError("plan", f"ue {ue}: row length {len(row)} != {plan.num_slots}")
        for t, sat in enumerate(row):
            if not vis.is_visible(ue, t, sat):
                raise InfeasibleError(ue, t, f"sat {sat} is not in the visibility set")


class _SlotCache:
    """Served sets and optimal subproblem values per (satellite, slot).

    Kept consistent with the current plan through `reassign`, so one sweep of
    the driver touches each subproblem only when its served set changes.
    """

    def __init__(self, scenario: Scenario, rates: RateMatrix, plan: AssociationPlan):
        self.spec = scenario.utility
        self.rates = rates
        T = plan.num_slots
        self.num_slots = T
        self.served: list[dict[int, set[int]]] = [dict() for _ in range(T)]
        self.values: list[dict[int, float]] = [dict() for _ in range(T)]
        self.slot_total: list[float] = [0.0] * T
        for ue, row in plan.serving.items():
            for t, sat in enumerate(row):
                self.served[t].setdefault(sat, set()).add(ue)
        for t in range(T):
            for sat, members in self.served[t].items():
                self.values[t][sat] = self._solve(t, sat, members)
            self.slot_total[t] = sum(self.values[t].values())

    def _solve(self, t: int, sat: int, members: Iterable[int]) -> float:
        dmax = {i: self.rates.dmax(i, t, sat) for i in members}
        return solve_subproblem(self.spec, dmax)[1]

    def value_of(self, t: int, sat: int) -> float:
        return self.values[t].get(sat, 0.0)

    def value_without(self, t: int, sat: int, ue: int) -> float:
        members = self.served[t].get(sat, set()) - {ue}
        return self._solve(t, sat, members) if members else 0.0

    def value_with(self, t: int, sat: int, ue: int) -> float:
        return self._solve(t, sat, self.served[t].get(sat, set()) | {ue})

    @property
    def u_ue(self) -> float:
        return sum(self.slot_total)

    def reassign(self, ue: int, t: int, new_sat: int) -> None:
        old_sat = None
        for sat, members in self.served[t].items():
            if ue in members:
                old_sat = sat
                break
        if old_sat == new_sat:
            return
        if old_sat is not None:
            members = self.served[t][old_sat]
            members.discard(ue)
            old_val = self.values[t].pop(old_sat)
            if members:
                self.values[t][old_sat] = self._solve(t, old_sat, members)
            else:
                del self.served[t][old_sat]
            self.slot_total[t] += self.values[t].get(old_sat, 0.0) - old_val
        members = self.served[t].setdefault(new_sat, set())
        members.add(ue)
        prev = self.values[t].get(new_sat, 0.0)
        self.values[t][new_sat] = self._solve(t, new_sat, members)
        self.slot_total[t] += self.values[t][new_sat] - prev


def _objective_from_cache(
    scenario: Scenario, cache: _SlotCache, plan: AssociationPlan
) -> PlanObjective:
    per_ue = {ue: plan.handovers(ue) for ue in plan.ue_ids()}
    n_ho = sum(per_ue.values())
    u_ue = cache.u_ue
    return PlanObjective(
        n_ho=n_ho,
        u_ue=u_ue,
        objective=n_ho - scenario.gamma * u_ue,
        per_slot_utility=tuple(cache.slot_total),
        per_ue_handovers=per_ue,
    )


def evaluate_plan(
    scenario: Scenario, vis: VisibilityMap, rates: RateMatrix, plan: AssociationPlan
) -> PlanObjective:
    """Handover count, aggregate utility, and combined objective of a plan.

    Handovers are counted at interior slot transitions; the utility sums the
    optimal resource-allocation value of every (satellite, slot) served set.
    """
    check_feasible(vis, plan)
    cache = _SlotCache(scenario, rates, plan)
    return _objective_from_cache(scenario, cache, plan)


def _slot_utilities_for_ue(
    scenario: Scenario,
    vis: VisibilityMap,
    cache: _SlotCache,
    ue: int,
    base: AssociationPlan,
    cand: list[int],
) -> np.ndarray:
    """U[k, t]: aggregate slot utility with `ue` moved to candidate k at t.

    Only the losing (current) and gaining satellites change; all other
    subproblem values are reused from the cache. -inf marks invisibility.
    """
    T = base.num_slots
    K = len(cand)
    idx = {sat: k for k, sat in enumerate(cand)}
    U = np.full((K, T), -np.inf)
    row = base.serving[ue]
    for t in range(T):
        j0 = row[t]
        base_total = cache.slot_total[t]
        v_j0 = cache.value_of(t, j0)
        v_j0_wo = cache.value_without(t, j0, ue)
        for sat, _el in vis.sets[(ue, t)]:
            k = idx[sat]
            if sat == j0:
                U[k, t] = base_total
            else:
                U[k, t] = base_total - v_j0 - cache.value_of(t, sat) + v_j0_wo + cache.value_with(
                    t, sat, ue
                )
    return U


def segment_utility(
    scenario: Scenario,
    vis: VisibilityMap,
    rates: RateMatrix,
    ue: int,
    sat: int,
    t1: int,
    t2: int,
    base: AssociationPlan,
) -> float:
    """Aggregate utility over slots [t1, t2] with `ue` pinned to `sat`.

    Returns -inf when the satellite is invisible anywhere in the range.
    """
    if not (0 <= t1 <= t2 < base.num_slots):
        raise ValidationError("segment", f"bad slot range [{t1}, {t2}]")
    if any(not vis.is_visible(ue, t, sat) for t in range(t1, t2 + 1)):
        return float("-inf")
    cache = _SlotCache(scenario, rates, base)
    total = 0.0
    row = base.serving[ue]
    for t in range(t1, t2 + 1):
        j0 = row[t]
        if sat == j0:
            total += cache.slot_total[t]
        else:
            total += (
                cache.slot_total[t]
                - cache.value_of(t, j0)
                - cache.value_of(t, sat)
                + cache.value_without(t, j0, ue)
                + cache.value_with(t, sat, ue)
            )
    return total


def _dp_best_row(
    ue: int,
    cand: list[int],
    U: np.ndarray,
    gamma: float,
    *,
    literal_segments: bool = False,
) -> list[int]:
    """Optimal serving row for one UE given per-(candidate, slot) utilities.

    Recurrence over the last-handover slot tau: cost(t) = min over tau of
    cost(tau) + [tau >= 1] - gamma * best single-satellite utility of slots
    (tau, t]. Ties prefer fewer handovers, then a later handover, then the
    lower satellite id. `literal_segments` recomputes every segment sum
    directly (cubic in T) instead of via prefix sums; results are identical.
    """
    K, T = U.shape
    vis_mask = np.isfinite(U)
    P = np.zeros((K, T + 1))
    np.cumsum(np.where(vis_mask, U, 0.0), axis=1, out=P[:, 1:])
    # last_inv[k, t] = latest 1-based slot <= t where candidate k is invisible
    slot_idx = np.arange(1, T + 1)
    last_inv = np.maximum.accumulate(np.where(~vis_mask, slot_idx, 0), axis=1)

    cost = np.zeros(T + 1)
    hops = np.zeros(T + 1, dtype=int)
    parent = np.zeros(T + 1, dtype=int)
    seg_sat = np.zeros(T + 1, dtype=int)
    for t in range(1, T + 1):
        taus = np.arange(t)
        if literal_segments:
            seg = np.empty((K, t))
            for k in range(K):
                for tau in range(t):
                    if np.all(vis_mask[k, tau:t]):
                        seg[k, tau] = float(np.sum(U[k, tau:t]))
                    else:
                        seg[k, tau] = -np.inf
        else:
            seg = P[:, t : t + 1] - P[:, :t]
            valid = last_inv[:, t - 1 : t] <= taus
            seg = np.where(valid, seg, -np.inf)
        best_u = seg.max(axis=0)
        best_k = seg.argmax(axis=0)  # first max: lowest candidate (sat id)
        cand_cost = cost[:t] + (taus >= 1) - gamma * best_u
        cmin = cand_cost.min()
        if not np.isfinite(cmin):
            raise InfeasibleError(ue, t - 1, "no candidate satellite covers any segment")
        tie_taus = np.nonzero(cand_cost == cmin)[0]
        best_tau = min(
            tie_taus,
            key=lambda tau: (hops[tau] + (1 if tau >= 1 else 0), -tau, cand[best_k[tau]]),
        )
        cost[t] = cmin
        parent[t] = best_tau
        seg_sat[t] = best_k[best_tau]
        hops[t] = hops[best_tau] + (1 if best_tau >= 1 else 0)

    row = [0] * T
    t = T
    while t > 0:
        tau = int(parent[t])
        row[tau:t] = [cand[int(seg_sat[t])]] * (t - tau)
        t = tau
    return row


def optimize_ue(
    scenario: Scenario,
    vis: VisibilityMap,
    rates: RateMatrix,
    ue: int,
    base: AssociationPlan,
    *,
    literal_segments: bool = False,
    _cache: _SlotCache | None = None,
) -> tuple[AssociationPlan, PlanObjective]:
    """Replace one UE's row with its optimal sequence, everyone else fixed.

    The base row is itself a candidate, so the returned objective is never
    worse than the base objective. When the driver supplies `_cache`, it is
    updated in place to match the returned plan.
    """
    if ue not in base.serving:
        raise ValidationError("ue", f"unknown ue id {ue}")
    cache = _cache if _cache is not None else _SlotCache(scenario, rates, base)
    cand = vis.candidates(ue)
    U = _slot_utilities_for_ue(scenario, vis, cache, ue, base, cand)
    row = _dp_best_row(ue, cand, U, scenario.gamma, literal_segments=literal_segments)

    result = base.copy()
    old_row = base.serving[ue]
    if row != old_row:
        result.serving[ue] = row
        for t in range(base.num_slots):
            if row[t] != old_row[t]:
                cache.reassign(ue, t, row[t])
    return result, _objective_from_cache(scenario, cache, result)


def plan(
    scenario: Scenario,
    vis: VisibilityMap,
    rates: RateMatrix,
    init: AssociationPlan,
    passes: int = 1,
) -> tuple[AssociationPlan, PlanObjective, list[float]]:
    """Alternating optimization: sweep optimize_ue over UEs in ascending id.

    Returns the final plan, its objective, and the per-iteration objective
    trace (initial value first, then one entry per UE step); the trace is
    non-increasing by construction.
    """
    if passes < 0:
        raise ValidationError("passes", "must be >= 0")
    check_feasible(vis, init)
    cache = _SlotCache(scenario, rates, init)
    current = init.copy()
    objective = _objective_from_cache(scenario, cache, current)
    trace = [objective.objective]
    for _ in range(passes):
        for ue in current.ue_ids():
            current, objective = optimize_ue(
                scenario, vis, rates, ue, current, _cache=cache
            )
            trace.append(objective.objective)
    return current, objective, trace


def initial_plan(scenario: Scenario, vis: VisibilityMap) -> AssociationPlan:
    """Deterministic longest-remaining-visibility seed.

    Each UE starts on the satellite with the longest contiguous visibility
    window and switches, on expiry, to the then-longest-lived visible
    satellite (ties to the lowest id).
    """
    T = vis.num_slots
    serving: dict[int, list[int]] = {}
    for ue in range(vis.num_ues):
        cand = vis.candidates(ue)
        visible = np.zeros((len(cand), T), dtype=bool)
        idx = {sat: k for k, sat in enumerate(cand)}
        for t in range(T):
            for sat, _el in vis.sets[(ue, t)]:
                visible[idx[sat], t] = True
        remaining = np.zeros((len(cand), T), dtype=int)
        remaining[:, T - 1] = visible[:, T - 1]
        for t in range(T - 2, -1, -1):
            remaining[:, t] = np.where(visible[:, t], remaining[:, t + 1] + 1, 0)
        row = []
        current = None
        for t in range(T):
            if current is None or not visible[idx[current], t]:
                current = cand[int(np.argmax(remaining[:, t]))]
            row.append(current)
        serving[ue] = row
    result = AssociationPlan(num_slots=T, serving=serving)
    check_feasible(vis, result)
    return result


def write_plan_csv(plan_: AssociationPlan, fh: TextIO) -> None:
    writer = csv.writer(fh)
    writer.writerow(["ue", "slot", "sat_id"])
    for ue in plan_.ue_ids():
        for t, sat in enumerate(plan_.serving[ue]):
            writer.writerow([ue, t, sat])


def read_plan_csv(fh: TextIO) -> AssociationPlan:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header != ["ue", "slot", "sat_id"]:
        raise ValidationError("plan_csv", f"unexpected header {header}")
    serving: dict[int, dict[int, int]] = {}
    for row in reader:
        if not row:
            continue
        ue, t, sat = int(row[0]), int(row[1]), int(row[2])
        serving.setdefault(ue, {})[t] = sat
    if not serving:
        raise ValidationError("plan_csv", "empty plan")
    num_slots = max(max(slots) for slots in serving.values()) + 1
    rows: dict[int, list[int]] = {}
    for ue, slots in serving.items():
        if sorted(slots) != list(range(num_slots)):
            raise ValidationError("plan_csv", f"ue {ue} is missing slots")
        rows[ue] = [slots[t] for t in range(num_slots)]
    return AssociationPlan(num_slots=num_slots, serving=rows)


def objective_to_dict(obj: PlanObjective, trace: list[float] | None = None) -> dict:
    doc = {
        "n_ho": obj.n_ho,
        "u_ue": obj.u_ue,
        "objective": obj.objective,
        "per_slot_utility": list(obj.per_slot_utility),
        "per_ue_handovers": {str(ue): n for ue, n in sorted(obj.per_ue_handovers.items())},
    }
    doc["trace"] = list(trace) if trace is not None else [obj.objective]
    return doc
