"""Signaling timelines for the four handover mechanisms.

Each mechanism is a fixed ordered message sequence whose propagation legs
come from the scenario geometry (distance over c) and whose per-message
processing and backhaul constants come from LatencyParams. The handover
latency of an event is the execution-phase duration (HIT) plus the
path-switch duration (DST); preparation and completion messages are listed
in the timeline but do not interrupt the UE.

Mechanisms:
  bho     reactive baseline, source and target reached through the core
          network behind ground stations
  bho_gs  same, but the nearest ground station anchors every core-network leg
  bho_a   reactive with inter-satellite (Xn) preparation and a core network
          that pre-switches the downlink path
  preho   pre-planned, time-triggered: no measurement report, no RACH, data
          forwarded in advance, no path switch
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, TextIO

import numpy as np

from .errors import LeohoError, ValidationError
from .geometry import (
    SPEED_OF_LIGHT_KM_S,
    PositionTable,
    elevation_deg,
    geodetic_to_ecef,
    propagate,
    ue_positions_ecef,
)

if TYPE_CHECKING:
    from .planner import AssociationPlan
    from .scenario import ConstellationSpec, Scenario

MECHANISMS = ("bho", "bho_gs", "bho_a", "preho")

# Default ground segment: eight stations spread in longitude at mid-latitudes.
_DEFAULT_GS = (
    (40.0, 0.0),
    (36.0, 45.0),
    (44.0, 90.0),
    (38.0, 135.0),
    (42.0, 180.0),
    (36.0, -135.0),
    (44.0, -90.0),
    (40.0, -45.0),
)


class NoVisibleGroundStationError(LeohoError):
    """A mechanism needs a ground-station leg but no station sees the satellite."""


@dataclass(frozen=True)
class LatencyParams:
    """Delay constants for the signaling timelines.

    gs_cn_ms and proc_ms are reconstructed calibration values; rach_ms
    defaults to the 21 ms a removed RACH procedure is worth; retune_ms is the
    UE-side radio retune/reconfiguration paid during any detach+attach.
    """

    gs_cn_ms: float = 30.0
    proc_ms: float = 2.0
    rach_ms: float = 21.0
    isl_hop_ms: float = 6.0
    retune_ms: float = 15.0
    gs_positions: tuple[tuple[float, float], ...] = _DEFAULT_GS
    xn_strategy: str = "similar_direction"
    opposite_penalty_hops: int = 8

    def __post_init__(self):
        for name in ("gs_cn_ms", "proc_ms", "rach_ms", "isl_hop_ms", "retune_ms"):
            if getattr(self, name) < 0.0:
                raise ValidationError(f"latency.{name}", "delays must be >= 0")
        if self.xn_strategy not in ("similar_direction", "all_direction"):
            raise ValidationError("latency.xn_strategy", f"unknown strategy {self.xn_strategy!r}")
        if self.opposite_penalty_hops < 0:
            raise ValidationError("latency.opposite_penalty_hops", "must be >= 0")
        if not self.gs_positions:
            raise ValidationError("latency.gs_positions", "need at least one ground station")


@dataclass(frozen=True)
class SignalingStep:
    message: str
    src: str
    dst: str
    delay_ms: float
    phase: str  # preparation | execution | path_switch | completion


@dataclass(frozen=True)
class HandoverTimeline:
    """Ordered message timeline of one handover under one mechanism."""

    mechanism: str
    steps: tuple[SignalingStep, ...]
    hit_ms: float
    dst_ms: float

    @property
    def total_ms(self) -> float:
        return self.hit_ms + self.dst_ms


def xn_hops(
    src_sat: int,
    tgt_sat: int,
    constellation: ConstellationSpec,
    strategy: str = "similar_direction",
    opposite_penalty_hops: int = 8,
) -> int:
    """Inter-satellite hop count on the Walker (plane, in-plane) torus grid.

    Manhattan distance with wraparound on both axes; under the all_direction
    strategy, pairs moving in opposite directions (ascending vs descending at
    the interval start) pay a fixed extra-hop penalty.
    """
    if constellation.kind != "walker_delta":
        raise ValidationError("constellation.kind", "xn_hops needs a walker_delta grid")
    planes, per_plane = constellation.num_planes, constellation.sats_per_plane
    p1, s1 = divmod(src_sat, per_plane)
    p2, s2 = divmod(tgt_sat, per_plane)
    dp = abs(p1 - p2)
    dp = min(dp, planes - dp)
    ds = abs(s1 - s2)
    ds = min(ds, per_plane - ds)
    hops = dp + ds
    if strategy == "all_direction" and hops > 0:

        def ascending(sat: int) -> bool:
            p, s = divmod(sat, per_plane)
            u0 = 2.0 * math.pi * (
                s / per_plane + constellation.phasing_factor * p / (planes * per_plane)
            )
            return math.cos(u0) > 0.0

        if ascending(src_sat) != ascending(tgt_sat):
            hops += opposite_penalty_hops
    return hops


def _prop_ms(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b))) / SPEED_OF_LIGHT_KM_S * 1e3


def _ascending(sat: int, constellation: ConstellationSpec) -> bool:
    planes, per_plane = constellation.num_planes, constellation.sats_per_plane
    p, s = divmod(sat, per_plane)
    u0 = 2.0 * math.pi * (s / per_plane + constellation.phasing_factor * p / (planes * per_plane))
    return math.cos(u0) > 0.0


def _same_direction_target(
    src_sat: int,
    tgt_sat: int,
    slot: int,
    ue_pos: np.ndarray,
    constellation: ConstellationSpec,
    table: PositionTable,
) -> int:
    """Substitute target under the similar-direction selection strategy.

    That strategy never hands over between opposite-motion satellites; when a
    plan pairs them anyway, the mechanism is simulated against its own pick:
    the highest-elevation satellite moving in the source's direction.
    """
    if _ascending(src_sat, constellation) == _ascending(tgt_sat, constellation):
        return tgt_sat
    from .geometry import elevation_deg_many

    els = elevation_deg_many(ue_pos, table.positions_at(slot))
    best, best_el = tgt_sat, -math.inf
    for k, sat in enumerate(table.sat_ids):
        if sat == src_sat or not _ascending(sat, constellation) == _ascending(
            src_sat, constellation
        ):
            continue
        if els[k] > best_el:
            best, best_el = sat, float(els[k])
    return best


def _nearest_visible_gs(sat_pos: np.ndarray, gs_ecef: list[np.ndarray]) -> np.ndarray:
    best = None
    best_dist = math.inf
    for gs in gs_ecef:
        dist = float(np.linalg.norm(sat_pos - gs))
        if dist > 0.0 and elevation_deg(gs, sat_pos) < 0.0:
            continue
        if dist < best_dist:
            best, best_dist = gs, dist
    if best is None:
        raise NoVisibleGroundStationError("no ground station above the horizon for a satellite")
    return best


def simulate_handover(
    mechanism: str,
    ue: int,
    src_sat: int,
    tgt_sat: int,
    slot: int,
    scenario: Scenario,
    params: LatencyParams | None = None,
    table: PositionTable | None = None,
) -> HandoverTimeline:
    """Message timeline of one handover event executed at the given slot."""
    if mechanism not in MECHANISMS:
        raise ValidationError("mechanism", f"unknown mechanism {mechanism!r}")
    params = params or scenario.latency
    table = table or propagate(scenario.constellation, scenario.time_grid)
    ue_pos = ue_positions_ecef(scenario)[ue]
    src_pos = table.position(src_sat, slot)
    tgt_pos = table.position(tgt_sat, slot)

    proc = params.proc_ms
    ue_src = _prop_ms(ue_pos, src_pos)
    ue_tgt = _prop_ms(ue_pos, tgt_pos)
    ue_node, src_node, tgt_node = f"UE{ue}", f"S-gNB{src_sat}", f"S-gNB{tgt_sat}"
    steps: list[SignalingStep] = []

    def add(message: str, src: str, dst: str, delay: float, phase: str) -> None:
        steps.append(SignalingStep(message, src, dst, delay, phase))

    if mechanism == "preho":
        add("detach-retune", ue_node, ue_node, params.retune_ms, "execution")
        add("attach-pregrant", ue_node, tgt_node, ue_tgt + proc, "execution")
    elif mechanism == "bho_a":
        if params.xn_strategy == "similar_direction":
            tgt_sat = _same_direction_target(
                src_sat, tgt_sat, slot, ue_pos, scenario.constellation, table
            )
            tgt_pos = table.position(tgt_sat, slot)
            ue_tgt = _prop_ms(ue_pos, tgt_pos)
            tgt_node = f"S-gNB{tgt_sat}"
        isl = params.isl_hop_ms * xn_hops(
            src_sat,
            tgt_sat,
            scenario.constellation,
            params.xn_strategy,
            params.opposite_penalty_hops,
        )
        add("measurement-report", ue_node, src_node, ue_src + proc, "preparation")
        add("xn-ho-request", src_node, tgt_node, isl + proc, "preparation")
        add("xn-ho-ack", tgt_node, src_node, isl + proc, "preparation")
        add("ho-command", src_node, ue_node, ue_src + proc, "execution")
        add("detach-retune", ue_node, ue_node, params.retune_ms, "execution")
        add("rach", ue_node, tgt_node, params.rach_ms + 2.0 * ue_tgt, "execution")
        add("ho-complete", ue_node, tgt_node, ue_tgt + proc, "execution")
        add("data-forward", src_node, tgt_node, isl + proc, "execution")
        add("release", tgt_node, src_node, isl + proc, "completion")
    else:  # bho, bho_gs: ground-station legs required
        gs_ecef = [geodetic_to_ecef(lat, lon) for lat, lon in params.gs_positions]
        gs_src = _nearest_visible_gs(src_pos, gs_ecef)
        src_gs = _prop_ms(src_pos, gs_src)
        if mechanism == "bho":
            gs_tgt = _nearest_visible_gs(tgt_pos, gs_ecef)
            tgt_gs = _prop_ms(tgt_pos, gs_tgt)
            cn = params.gs_cn_ms
            add("measurement-report", ue_node, src_node, ue_src + proc, "preparation")
            add("ho-request", src_node, "GS-src", src_gs + proc, "preparation")
            add("ho-request", "GS-src", "CN", cn + proc, "preparation")
            add("ho-request", "CN", "GS-tgt", cn + proc, "preparation")
            add("ho-request", "GS-tgt", tgt_node, tgt_gs + proc, "preparation")
            add("ho-command", src_node, ue_node, ue_src + proc, "execution")
            add("detach-retune", ue_node, ue_node, params.retune_ms, "execution")
            add("rach", ue_node, tgt_node, params.rach_ms + 2.0 * ue_tgt, "execution")
            add("ho-complete", ue_node, tgt_node, ue_tgt + proc, "execution")
            add("data-forward", src_node, "GS-src", src_gs + proc, "execution")
            add("data-forward", "GS-src", "CN", cn + proc, "execution")
            add("data-forward", "CN", "GS-tgt", cn + proc, "execution")
            add("data-forward", "GS-tgt", tgt_node, tgt_gs + proc, "execution")
            add("path-switch", tgt_node, "GS-tgt", tgt_gs + proc, "path_switch")
            add("path-switch", "GS-tgt", "CN", cn + proc, "path_switch")
            add("path-switch-ack", "CN", "GS-tgt", cn + proc, "path_switch")
            add("release", "CN", "GS-src", cn + proc, "completion")
            add("release", "GS-src", src_node, src_gs + proc, "completion")
        else:  # bho_gs: the nearest GS replaces the CN as the anchor
            anchor_tgt = _prop_ms(tgt_pos, gs_src)
            add("measurement-report", ue_node, src_node, ue_src + proc, "preparation")
            add("ho-request", src_node, "GS", src_gs + proc, "preparation")
            add("ho-request", "GS", tgt_node, anchor_tgt + proc, "preparation")
            add("ho-command", src_node, ue_node, ue_src + proc, "execution")
            add("detach-retune", ue_node, ue_node, params.retune_ms, "execution")
            add("rach", ue_node, tgt_node, params.rach_ms + 2.0 * ue_tgt, "execution")
            add("ho-complete", ue_node, tgt_node, ue_tgt + proc, "execution")
            add("data-forward", src_node, "GS", src_gs + proc, "execution")
            add("data-forward", "GS", tgt_node, anchor_tgt + proc, "execution")
            add("path-switch", tgt_node, "GS", anchor_tgt + proc, "path_switch")
            add("path-switch-ack", "GS", tgt_node, anchor_tgt + proc, "path_switch")
            add("release", "GS", src_node, src_gs + proc, "completion")

    hit = sum(s.delay_ms for s in steps if s.phase == "execution")
    dst = sum(s.delay_ms for s in steps if s.phase == "path_switch")
    return HandoverTimeline(mechanism=mechanism, steps=tuple(steps), hit_ms=hit, dst_ms=dst)


@dataclass(frozen=True)
class LatencyDistribution:
    """Per-handover totals of one mechanism over one plan."""

    mechanism: str
    totals_ms: tuple[float, ...]  # sorted ascending
    mean_ms: float  # NaN flags an empty distribution
    timelines: tuple[HandoverTimeline, ...]

    @property
    def empty(self) -> bool:
        return not self.totals_ms


def latency_cdf(
    plan: AssociationPlan,
    mechanism: str,
    scenario: Scenario,
    params: LatencyParams | None = None,
) -> LatencyDistribution:
    """One timeline per handover event in the plan; empty plans are flagged."""
    params = params or scenario.latency
    table = propagate(scenario.constellation, scenario.time_grid)
    timelines = [
        simulate_handover(mechanism, ue, src, tgt, slot, scenario, params, table)
        for ue, slot, src, tgt in plan.handover_events()
    ]
    totals = tuple(sorted(t.total_ms for t in timelines))
    mean = float(np.mean(totals)) if totals else float("nan")
    return LatencyDistribution(
        mechanism=mechanism, totals_ms=totals, mean_ms=mean, timelines=tuple(timelines)
    )


def summarize(dist: LatencyDistribution) -> dict:
    if dist.empty:
        return {
            "mechanism": dist.mechanism,
            "count": 0,
            "empty": True,
            "mean_ms": None,
            "median_ms": None,
            "p95_ms": None,
        }
    arr = np.array(dist.totals_ms)
    return {
        "mechanism": dist.mechanism,
        "count": len(arr),
        "empty": False,
        "mean_ms": float(np.mean(arr)),
        "median_ms": float(np.median(arr)),
        "p95_ms": float(np.percentile(arr, 95)),
    }


def write_cdf_csv(dist: LatencyDistribution, fh: TextIO) -> None:
    writer = csv.writer(fh)
    writer.writerow(["mechanism", "total_ms"])
    for total in dist.totals_ms:
        writer.writerow([dist.mechanism, repr(total)])
