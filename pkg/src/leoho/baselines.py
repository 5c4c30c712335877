"""Comparison handover policies: LSS, LST, and per-slot Greedy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from .alloc import solve_subproblem
from .errors import ValidationError
from .planner import AssociationPlan, check_feasible, initial_plan

if TYPE_CHECKING:
    from .channel import RateMatrix
    from .geometry import VisibilityMap
    from .scenario import Scenario

BASELINE_KINDS = ("lss", "lst", "greedy")


@dataclass(frozen=True)
class BaselineKind:
    kind: str
    lss_trigger_ratio: float = 1.5  # linear-SINR ratio that triggers a switch

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ValidationError("baseline.kind", f"unknown baseline {self.kind!r}")
        if not (self.lss_trigger_ratio > 1.0):
            raise ValidationError("baseline.lss_trigger_ratio", "must be > 1")


def _best_sinr_sat(rates: RateMatrix, vis: VisibilityMap, ue: int, t: int) -> int:
    sats = vis.sats(ue, t)
    return max(sats, key=lambda j: (rates.sinr(ue, t, j), -j))


def _lss_plan(scenario: Scenario, vis: VisibilityMap, rates: RateMatrix, ratio: float):
    serving: dict[int, list[int]] = {}
    for ue in range(vis.num_ues):
        row: list[int] = []
        current: int | None = None
        for t in range(vis.num_slots):
            if current is None or not vis.is_visible(ue, t, current):
                current = _best_sinr_sat(rates, vis, ue, t)
            else:
                best = _best_sinr_sat(rates, vis, ue, t)
                if rates.sinr(ue, t, best) >= ratio * rates.sinr(ue, t, current):
                    current = best
            row.append(current)
        serving[ue] = row
    return AssociationPlan(num_slots=vis.num_slots, serving=serving)


def _greedy_plan(scenario: Scenario, vis: VisibilityMap, rates: RateMatrix):
    """Per slot, UEs in ascending id pick the satellite with the smallest
    marginal objective (handover indicator minus gamma-weighted utility gain),
    given the slot assignments already made.

    Slot t starts from the previous slot's assignments where still visible;
    the utility gain of a candidate re-solves only that satellite's
    subproblem with the closed form.
    """
    spec = scenario.utility
    gamma = scenario.gamma
    serving: dict[int, list[int]] = {ue: [] for ue in range(vis.num_ues)}
    prev: dict[int, int | None] = {ue: None for ue in range(vis.num_ues)}
    for t in range(vis.num_slots):
        # Carry forward still-visible assignments as the provisional load.
        sets: dict[int, set[int]] = {}
        assigned: dict[int, int] = {}
        for ue in range(vis.num_ues):
            p = prev[ue]
            if p is not None and vis.is_visible(ue, t, p):
                sets.setdefault(p, set()).add(ue)
                assigned[ue] = p

        def set_value(sat: int, members: set[int]) -> float:
            if not members:
                return 0.0
            dmax = {i: rates.dmax(i, t, sat) for i in members}
            return solve_subproblem(spec, dmax)[1]

        for ue in range(vis.num_ues):
            cur = assigned.pop(ue, None)
            if cur is not None:
                sets[cur].discard(ue)
            best_sat, best_key = None, None
            for sat in vis.sats(ue, t):
                members = sets.get(sat, set())
                gain = set_value(sat, members | {ue}) - set_value(sat, members)
                switch = 1.0 if (prev[ue] is not None and sat != prev[ue]) else 0.0
                key = (switch - gamma * gain, sat)
                if best_key is None or key < best_key:
                    best_sat, best_key = sat, key
            sets.setdefault(best_sat, set()).add(ue)
            serving[ue].append(best_sat)
        for ue in range(vis.num_ues):
            prev[ue] = serving[ue][-1]
    return AssociationPlan(num_slots=vis.num_slots, serving=serving)


def run_baseline(
    kind: BaselineKind | str,
    scenario: Scenario,
    vis: VisibilityMap,
    rates: RateMatrix,
) -> AssociationPlan:
    """Run one comparison policy; all are deterministic, ties to lowest sat id."""
    if isinstance(kind, str):
        kind = BaselineKind(kind=kind)
    if kind.kind == "lss":
        result = _lss_plan(scenario, vis, rates, kind.lss_trigger_ratio)
    elif kind.kind == "lst":
        result = initial_plan(scenario, vis)
    else:
        result = _greedy_plan(scenario, vis, rates)
    check_feasible(vis, result)
    return result
