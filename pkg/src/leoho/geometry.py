"""Satellite propagation, elevation angles, and per-slot visibility sets.

All positions are Earth-centered Earth-fixed (ECEF) in kilometers on a
spherical Earth. Circular-orbit constellations are propagated analytically;
alternatively a position table supplies per-slot coordinates directly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, TextIO

import numpy as np

from .errors import InfeasibleError, ParseError, ValidationError

if TYPE_CHECKING:
    from .scenario import ConstellationSpec, Scenario, TimeGrid

EARTH_RADIUS_KM = 6371.0
MU_KM3_S2 = 398600.4418
EARTH_ROT_RAD_S = 7.2921159e-5
SPEED_OF_LIGHT_KM_S = 299792.458

POSITION_TABLE_HEADER = ["slot", "sat_id", "x_km", "y_km", "z_km"]


def geodetic_to_ecef(lat_deg: float, lon_deg: float, alt_m: float = 0.0) -> np.ndarray:
    """Spherical-Earth geodetic to ECEF (km)."""
    r = EARTH_RADIUS_KM + alt_m / 1000.0
    lat = math.radians(lat_deg)
    lon = math.radians(lon_deg)
    return np.array(
        [r * math.cos(lat) * math.cos(lon), r * math.cos(lat) * math.sin(lon), r * math.sin(lat)]
    )


def orbital_rate_rad_s(altitude_km: float) -> float:
    """Circular-orbit angular rate from Kepler's third law."""
    a = EARTH_RADIUS_KM + altitude_km
    return math.sqrt(MU_KM3_S2 / a**3)


@dataclass(eq=False)
class PositionTable:
    """Per-slot ECEF positions for every satellite.

    xyz_km has shape (num_sats, num_slots, 3); rows follow sat_ids order.
    """

    sat_ids: list[int]
    xyz_km: np.ndarray

    def __post_init__(self):
        self._index = {sat: k for k, sat in enumerate(self.sat_ids)}

    @property
    def num_slots(self) -> int:
        return self.xyz_km.shape[1]

    def position(self, sat_id: int, slot: int) -> np.ndarray:
        return self.xyz_km[self._index[sat_id], slot]

    def positions_at(self, slot: int) -> np.ndarray:
        return self.xyz_km[:, slot, :]


def _propagate_walker(spec: ConstellationSpec, grid: TimeGrid) -> PositionTable:
    planes = spec.num_planes
    per_plane = spec.sats_per_plane
    a = EARTH_RADIUS_KM + spec.altitude_km
    inc = math.radians(spec.inclination_deg)
    n = orbital_rate_rad_s(spec.altitude_km)

    t = np.arange(grid.num_slots) * grid.slot_duration_s  # slot-start instants
    theta = EARTH_ROT_RAD_S * t  # Greenwich angle, zero at interval start
    cos_t, sin_t = np.cos(theta), np.sin(theta)

    sat_ids = []
    xyz = np.empty((planes * per_plane, grid.num_slots, 3))
    for p in range(planes):
        raan = math.radians(spec.raan_offset_deg + 360.0 * p / planes)
        for s in range(per_plane):
            u0 = 2.0 * math.pi * (s / per_plane + spec.phasing_factor * p / (planes * per_plane))
            u = u0 + n * t
            cos_u, sin_u = np.cos(u), np.sin(u)
            # ECI position on the circular orbit, then rotate by the
            # accumulated Earth angle into ECEF.
            xi = a * (math.cos(raan) * cos_u - math.sin(raan) * sin_u * math.cos(inc))
            yi = a * (math.sin(raan) * cos_u + math.cos(raan) * sin_u * math.cos(inc))
            zi = a * sin_u * math.sin(inc)
            sat = p * per_plane + s
            sat_ids.append(sat)
            xyz[sat, :, 0] = xi * cos_t + yi * sin_t
            xyz[sat, :, 1] = -xi * sin_t + yi * cos_t
            xyz[sat, :, 2] = zi
    return PositionTable(sat_ids=sat_ids, xyz_km=xyz)


def read_position_table(source: str | TextIO, num_slots: int) -> PositionTable:
    """Parse a `slot,sat_id,x_km,y_km,z_km` table covering every (slot, sat)."""
    if isinstance(source, str):
        with open(source, newline="") as fh:
            return read_position_table(fh, num_slots)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != POSITION_TABLE_HEADER:
        raise ParseError(f"position table header must be {','.join(POSITION_TABLE_HEADER)}")
    entries: dict[tuple[int, int], tuple[float, float, float]] = {}
    for row in reader:
        if not row:
            continue
        try:
            slot, sat = int(row[0]), int(row[1])
            pos = (float(row[2]), float(row[3]), float(row[4]))
        except (ValueError, IndexError) as exc:
            raise ParseError(f"bad position table row {row!r}") from exc
        entries[(slot, sat)] = pos
    sat_ids = sorted({sat for _, sat in entries})
    if not sat_ids:
        raise ParseError("position table contains no satellites")
    xyz = np.empty((len(sat_ids), num_slots, 3))
    for k, sat in enumerate(sat_ids):
        for slot in range(num_slots):
            if (slot, sat) not in entries:
                raise ParseError(f"position table missing entry for slot={slot} sat_id={sat}")
            xyz[k, slot] = entries[(slot, sat)]
    return PositionTable(sat_ids=sat_ids, xyz_km=xyz)


def propagate(constellation: ConstellationSpec, grid: TimeGrid) -> PositionTable:
    """Per-slot satellite positions for the whole planning interval."""
    if constellation.kind == "walker_delta":
        return _propagate_walker(constellation, grid)
    return read_position_table(constellation.path, grid.num_slots)


def elevation_deg(ue: np.ndarray, sat: np.ndarray) -> float:
    """Angle between the UE's local horizontal plane and the UE->sat line.

    Uses the asin of the dot product between the local-vertical unit vector
    and the UE->sat unit vector, exact on the spherical model.
    """
    ue = np.asarray(ue, dtype=float)
    sat = np.asarray(sat, dtype=float)
    r = np.linalg.norm(ue)
    if r == 0.0:
        raise ValidationError("ue", "local vertical undefined at the Earth center")
    d = sat - ue
    dn = np.linalg.norm(d)
    if dn == 0.0:
        raise ValidationError("sat", "satellite coincides with the UE")
    s = float(np.dot(ue / r, d / dn))
    return math.degrees(math.asin(min(1.0, max(-1.0, s))))


def elevation_deg_many(ue: np.ndarray, sats: np.ndarray) -> np.ndarray:
    """Vectorized elevation from one UE to an (..., 3) array of satellites."""
    ue = np.asarray(ue, dtype=float)
    r = np.linalg.norm(ue)
    if r == 0.0:
        raise ValidationError("ue", "local vertical undefined at the Earth center")
    d = np.asarray(sats, dtype=float) - ue
    dn = np.linalg.norm(d, axis=-1)
    s = (d @ (ue / r)) / dn
    return np.degrees(np.arcsin(np.clip(s, -1.0, 1.0)))


@dataclass(eq=False)
class VisibilityMap:
    """Per-(ue, slot) admissible satellites with their elevation angles.

    sets[(ue, slot)] is a tuple of (sat_id, elevation_deg) pairs sorted by
    satellite id; every listed pair meets the minimum elevation threshold.
    """

    num_ues: int
    num_slots: int
    sets: dict[tuple[int, int], tuple[tuple[int, float], ...]]

    def sats(self, ue: int, slot: int) -> list[int]:
        return [sat for sat, _ in self.sets[(ue, slot)]]

    def elevation(self, ue: int, slot: int, sat: int) -> float:
        for s, el in self.sets[(ue, slot)]:
            if s == sat:
                return el
        raise KeyError(f"sat {sat} not visible for ue {ue} at slot {slot}")

    def is_visible(self, ue: int, slot: int, sat: int) -> bool:
        return any(s == sat for s, _ in self.sets[(ue, slot)])

    def candidates(self, ue: int) -> list[int]:
        """Sorted satellite ids ever visible to this UE."""
        out: set[int] = set()
        for t in range(self.num_slots):
            out.update(sat for sat, _ in self.sets[(ue, t)])
        return sorted(out)

    def all_sats(self) -> list[int]:
        out: set[int] = set()
        for pairs in self.sets.values():
            out.update(sat for sat, _ in pairs)
        return sorted(out)

    def write_csv(self, fh: TextIO) -> None:
        writer = csv.writer(fh)
        writer.writerow(["ue", "slot", "sat_id", "elevation_deg"])
        for ue in range(self.num_ues):
            for t in range(self.num_slots):
                for sat, el in self.sets[(ue, t)]:
                    writer.writerow([ue, t, sat, repr(el)])


def ue_positions_ecef(scenario: Scenario) -> np.ndarray:
    """(N, 3) ECEF positions of the scenario's UEs."""
    return np.array(
        [geodetic_to_ecef(lat, lon, alt) for lat, lon, alt in scenario.ues.positions]
    )


def build_visibility(scenario: Scenario, table: PositionTable | None = None) -> VisibilityMap:
    """Materialize the admissible-satellite sets for every (ue, slot).

    Visibility is evaluated at the slot-start instant; an elevation exactly
    equal to the threshold counts as visible. Raises InfeasibleError naming
    the first (ue, slot) whose set would be empty, since the planning problem
    requires one serving satellite per slot.
    """
    table = table or propagate(scenario.constellation, scenario.time_grid)
    ues = ue_positions_ecef(scenario)
    theta_min = scenario.min_elevation_deg
    sat_ids = np.asarray(table.sat_ids)
    sets: dict[tuple[int, int], tuple[tuple[int, float], ...]] = {}
    for i, ue in enumerate(ues):
        el = elevation_deg_many(ue, table.xyz_km.transpose(1, 0, 2))  # (T, M)
        mask = el >= theta_min
        for t in range(scenario.time_grid.num_slots):
            cols = np.nonzero(mask[t])[0]
            if cols.size == 0:
                raise InfeasibleError(i, t)
            sets[(i, t)] = tuple((int(sat_ids[c]), float(el[t, c])) for c in cols)
    return VisibilityMap(num_ues=len(ues), num_slots=scenario.time_grid.num_slots, sets=sets)
