"""Link rates: SINR and per-slot maximum throughput for every visible link.

A deterministic free-space link budget (EIRP + G/T - path loss - thermal
noise - noise margin) stands in for the radio environment, with optional
seeded log-normal shadowing. The SINR model sits behind `sinr_db_for_links`
so an alternative model can be swapped in without touching anything
downstream.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, TextIO

import numpy as np

from .errors import ValidationError
from .geometry import SPEED_OF_LIGHT_KM_S, PositionTable, propagate, ue_positions_ecef

if TYPE_CHECKING:
    from .geometry import VisibilityMap
    from .scenario import Scenario

BOLTZMANN_DBW_PER_K_HZ = 10.0 * math.log10(1.380649e-23)  # -228.599 dBW/K/Hz


@dataclass(frozen=True)
class ChannelParams:
    """Link-budget constants shared by every satellite unless overridden.

    noise_margin_db absorbs interference and implementation losses; the
    default is calibrated so a zenith link at 550 km / 2 GHz sits near
    10 dB SINR.
    """

    carrier_hz: float = 2.0e9
    sat_eirp_dbw: float = 37.0
    ue_gain_over_temp_db_per_k: float = -10.0
    bandwidth_max_hz: float = 20.0e6
    shadowing_sigma_db: float = 0.0
    noise_margin_db: float = 19.3
    seed: int = 0
    bandwidth_overrides_hz: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if not (self.carrier_hz > 0.0):
            raise ValidationError("channel.carrier_hz", "must be > 0")
        if not (self.bandwidth_max_hz > 0.0):
            raise ValidationError("channel.bandwidth_max_hz", "must be > 0")
        if self.shadowing_sigma_db < 0.0:
            raise ValidationError("channel.shadowing_sigma_db", "must be >= 0")

    def bandwidth_hz(self, sat_id: int) -> float:
        return self.bandwidth_overrides_hz.get(sat_id, self.bandwidth_max_hz)


def free_space_path_loss_db(distance_km: float | np.ndarray, carrier_hz: float):
    """FSPL = 20 log10(4 pi d f / c)."""
    d_m = np.asarray(distance_km, dtype=float) * 1000.0
    return 20.0 * np.log10(4.0 * math.pi * d_m * carrier_hz / (SPEED_OF_LIGHT_KM_S * 1000.0))


_M64 = (1 << 64) - 1


def _splitmix64(z: np.ndarray) -> np.ndarray:
    z = (z + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(_M64)
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(_M64)
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(_M64)
    return z ^ (z >> np.uint64(31))


def _hashed_uniform(seed: int, ue: np.ndarray, sat: np.ndarray, slot: np.ndarray, salt: int):
    """Open-unit-interval uniforms keyed by (seed, ue, sat, slot, salt).

    Counter-based so the per-link draw is independent of evaluation order:
    serial and parallel rate computation agree bit-for-bit.
    """
    with np.errstate(over="ignore"):
        h = _splitmix64(np.uint64(seed & _M64) ^ _splitmix64(ue.astype(np.uint64)))
        h = _splitmix64(h ^ _splitmix64(sat.astype(np.uint64) + np.uint64(0x1000)))
        h = _splitmix64(h ^ _splitmix64(slot.astype(np.uint64) + np.uint64(0x2000)))
        h = _splitmix64(h ^ np.uint64(salt))
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) / float(1 << 53)


def shadowing_db(params: ChannelParams, ue, sat, slot) -> np.ndarray:
    """Deterministic per-(ue, sat, slot) log-normal shadowing in dB."""
    ue = np.atleast_1d(np.asarray(ue, dtype=np.int64))
    sat = np.atleast_1d(np.asarray(sat, dtype=np.int64))
    slot = np.atleast_1d(np.asarray(slot, dtype=np.int64))
    u1 = _hashed_uniform(params.seed, ue, sat, slot, 1)
    u2 = _hashed_uniform(params.seed, ue, sat, slot, 2)
    z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * math.pi * u2)
    return params.shadowing_sigma_db * z


def sinr_db_for_links(
    params: ChannelParams,
    distance_km: np.ndarray,
    sat_ids: np.ndarray,
    ue_ids: np.ndarray,
    slots: np.ndarray,
) -> np.ndarray:
    """Free-space link budget SINR for a batch of links."""
    bw = np.array([params.bandwidth_hz(int(s)) for s in sat_ids])
    sinr = (
        params.sat_eirp_dbw
        + params.ue_gain_over_temp_db_per_k
        - free_space_path_loss_db(distance_km, params.carrier_hz)
        - BOLTZMANN_DBW_PER_K_HZ
        - 10.0 * np.log10(bw)
        - params.noise_margin_db
    )
    if params.shadowing_sigma_db > 0.0:
        sinr = sinr + shadowing_db(params, ue_ids, sat_ids, slots)
    return sinr


@dataclass(eq=False)
class RateMatrix:
    """SINR and maximum per-slot throughput for every visible link.

    Keyed sparsely: entries exist only for (ue, slot, sat) triples present in
    the visibility map. Throughput is in megabits (slot_duration * bandwidth *
    log2(1 + SINR) / 1e6).
    """

    sinr_linear: dict[tuple[int, int], dict[int, float]]
    dmax_mb: dict[tuple[int, int], dict[int, float]]

    def dmax(self, ue: int, slot: int, sat: int) -> float:
        return self.dmax_mb[(ue, slot)][sat]

    def dmax_map(self, ue: int, slot: int) -> dict[int, float]:
        return self.dmax_mb[(ue, slot)]

    def sinr(self, ue: int, slot: int, sat: int) -> float:
        return self.sinr_linear[(ue, slot)][sat]

    def write_csv(self, fh: TextIO) -> None:
        writer = csv.writer(fh)
        writer.writerow(["ue", "slot", "sat_id", "sinr_db", "dmax_mb"])
        for (ue, t) in sorted(self.sinr_linear):
            for sat, lin in self.sinr_linear[(ue, t)].items():
                writer.writerow(
                    [ue, t, sat, repr(10.0 * math.log10(lin)), repr(self.dmax_mb[(ue, t)][sat])]
                )


# A SINR model maps (params, distance_km, sat_ids, ue_ids, slots) to dB
# values; compute_rates accepts any callable with this shape so statistical
# or data-driven models can replace the free-space budget.
SinrModel = Callable[
    [ChannelParams, np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray
]


def compute_rates(
    scenario: Scenario,
    vis: VisibilityMap,
    table: PositionTable | None = None,
    sinr_model: SinrModel | None = None,
) -> RateMatrix:
    """Rates for every visible link; deterministic for a fixed channel seed."""
    table = table or propagate(scenario.constellation, scenario.time_grid)
    ues = ue_positions_ecef(scenario)
    params = scenario.channel
    model = sinr_model or sinr_db_for_links
    dt = scenario.time_grid.slot_duration_s
    sinr_out: dict[tuple[int, int], dict[int, float]] = {}
    dmax_out: dict[tuple[int, int], dict[int, float]] = {}
    for i in range(vis.num_ues):
        ue_ids, sat_ids, slots, dists = [], [], [], []
        for t in range(vis.num_slots):
            for sat, _el in vis.sets[(i, t)]:
                ue_ids.append(i)
                sat_ids.append(sat)
                slots.append(t)
                dists.append(float(np.linalg.norm(table.position(sat, t) - ues[i])))
        sinr_db = model(
            params,
            np.array(dists),
            np.array(sat_ids),
            np.array(ue_ids),
            np.array(slots),
        )
        lin = 10.0 ** (sinr_db / 10.0)
        for k, (sat, t) in enumerate(zip(sat_ids, slots)):
            bw = params.bandwidth_hz(sat)
            dmax = dt * bw * math.log2(1.0 + lin[k]) / 1e6
            sinr_out.setdefault((i, t), {})[sat] = float(lin[k])
            dmax_out.setdefault((i, t), {})[sat] = float(dmax)
    return RateMatrix(sinr_linear=sinr_out, dmax_mb=dmax_out)
