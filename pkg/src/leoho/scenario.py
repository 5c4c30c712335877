"""Scenario definition: everything needed for one planning interval.

A scenario is loaded from a single YAML document (one file per scenario) and
is immutable after construction, so it can be shared freely across workers.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import yaml

from .channel import ChannelParams
from .errors import ParseError, ValidationError
from .protosim import LatencyParams
from .utility import UtilitySpec


@dataclass(frozen=True)
class TimeGrid:
    """Uniform slotting of the planning interval."""

    num_slots: int
    slot_duration_s: float
    interval_start: float = 0.0  # epoch seconds, UTC

    def __post_init__(self):
        if self.num_slots < 1:
            raise ValidationError("time_grid.num_slots", "must be >= 1")
        if not (self.slot_duration_s > 0.0):
            raise ValidationError("time_grid.slot_duration_s", "must be > 0")

    @property
    def duration_s(self) -> float:
        return self.num_slots * self.slot_duration_s


@dataclass(frozen=True)
class ConstellationSpec:
    """Satellite population: an analytic Walker delta shell or a position table."""

    kind: str
    num_planes: int | None = None
    sats_per_plane: int | None = None
    inclination_deg: float | None = None
    altitude_km: float | None = None
    phasing_factor: int = 0
    raan_offset_deg: float = 0.0
    path: str | None = None  # position_table file

    def __post_init__(self):
        if self.kind == "walker_delta":
            if self.num_planes is None or self.num_planes < 1:
                raise ValidationError("constellation.num_planes", "must be >= 1")
            if self.sats_per_plane is None or self.sats_per_plane < 1:
                raise ValidationError("constellation.sats_per_plane", "must be >= 1")
            if self.altitude_km is None or not (self.altitude_km > 0.0):
                raise ValidationError("constellation.altitude_km", "must be > 0")
            if self.inclination_deg is None or not (0.0 <= self.inclination_deg <= 180.0):
                raise ValidationError("constellation.inclination_deg", "must be in [0, 180]")
        elif self.kind == "position_table":
            if not self.path:
                raise ValidationError("constellation.path", "position_table requires a path")
        else:
            raise ValidationError("constellation.kind", f"unknown kind {self.kind!r}")

    @property
    def num_sats(self) -> int:
        if self.kind != "walker_delta":
            raise ValidationError("constellation.kind", "satellite count needs walker_delta")
        return self.num_planes * self.sats_per_plane


@dataclass(frozen=True)
class UePopulation:
    """Fixed UE positions for the whole interval (geodetic degrees, meters).

    bbox (lat_min, lat_max, lon_min, lon_max) is retained when positions were
    synthesized so sweeps can re-draw populations at other counts.
    """

    positions: tuple[tuple[float, float, float], ...]
    seed: int | None = None
    bbox: tuple[float, float, float, float] | None = None

    def __post_init__(self):
        if len(self.positions) < 1:
            raise ValidationError("ues.positions", "need at least one UE")
        for k, (lat, lon, _alt) in enumerate(self.positions):
            if not (-90.0 <= lat <= 90.0):
                raise ValidationError("ues.positions", f"ue {k}: latitude {lat} out of [-90, 90]")
            if not (-180.0 <= lon <= 180.0):
                raise ValidationError("ues.positions", f"ue {k}: longitude {lon} out of [-180, 180]")

    def __len__(self) -> int:
        return len(self.positions)


def synthesize_ues(
    count: int,
    bbox: tuple[float, float, float, float],
    seed: int,
    alt_m: float = 0.0,
) -> UePopulation:
    """Draw `count` UE positions uniformly inside the bounding box.

    Pure function of (count, bbox, seed); a point-like box is allowed, an
    inverted one is not.
    """
    if count < 1:
        raise ValidationError("ues.count", "must be >= 1")
    lat_min, lat_max, lon_min, lon_max = bbox
    if lat_min > lat_max or lon_min > lon_max:
        raise ValidationError("ues.bbox", f"degenerate box {bbox}")
    rng = np.random.default_rng(seed)
    lats = rng.uniform(lat_min, lat_max, count)
    lons = rng.uniform(lon_min, lon_max, count)
    positions = tuple((float(a), float(o), float(alt_m)) for a, o in zip(lats, lons))
    return UePopulation(positions=positions, seed=seed, bbox=tuple(float(v) for v in bbox))


@dataclass(frozen=True)
class Scenario:
    """Immutable description of one planning interval."""

    time_grid: TimeGrid
    constellation: ConstellationSpec
    ues: UePopulation
    min_elevation_deg: float
    channel: ChannelParams
    utility: UtilitySpec
    gamma: float
    latency: LatencyParams = field(default_factory=lambda: LatencyParams())

    def __post_init__(self):
        if not (0.0 < self.min_elevation_deg < 90.0):
            raise ValidationError("min_elevation_deg", "must be in (0, 90)")
        if not (self.gamma > 0.0) or not math.isfinite(self.gamma):
            raise ValidationError("gamma", "must be a finite real > 0")

    @property
    def num_ues(self) -> int:
        return len(self.ues)


def _require_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ValidationError(where, f"unknown keys {sorted(unknown)}")


def _coerce(section: dict, floats: tuple[str, ...] = (), ints: tuple[str, ...] = ()) -> dict:
    """Normalize numeric fields; PyYAML leaves '2.0e9'-style literals as strings."""
    out = dict(section)
    for name in floats:
        if name in out and out[name] is not None:
            out[name] = float(out[name])
    for name in ints:
        if name in out and out[name] is not None:
            out[name] = int(out[name])
    return out


def _build_ues(section: dict) -> UePopulation:
    _require_keys(section, {"positions", "count", "bbox", "seed", "alt_m"}, "ues")
    if "positions" in section:
        positions = tuple(tuple(float(v) for v in p) for p in section["positions"])
        bbox = tuple(float(v) for v in section["bbox"]) if "bbox" in section else None
        return UePopulation(positions=positions, seed=section.get("seed"), bbox=bbox)
    if "count" not in section or "bbox" not in section:
        raise ValidationError("ues", "need either positions or count+bbox+seed")
    return synthesize_ues(
        int(section["count"]),
        tuple(float(v) for v in section["bbox"]),
        int(section.get("seed", 0)),
        float(section.get("alt_m", 0.0)),
    )


def scenario_from_dict(doc: dict, base_dir: str = ".") -> Scenario:
    """Build and validate a Scenario from a parsed config document."""
    if not isinstance(doc, dict):
        raise ValidationError("scenario", "config document must be a mapping")
    _require_keys(
        doc,
        {
            "time_grid",
            "constellation",
            "ues",
            "min_elevation_deg",
            "gamma",
            "channel",
            "utility",
            "latency",
        },
        "scenario",
    )
    for key in ("time_grid", "constellation", "ues", "min_elevation_deg", "gamma"):
        if key not in doc:
            raise ValidationError(key, "missing required section")
    try:
        grid = TimeGrid(
            **_coerce(
                doc["time_grid"],
                floats=("slot_duration_s", "interval_start"),
                ints=("num_slots",),
            )
        )
        cons = _coerce(
            doc["constellation"],
            floats=("inclination_deg", "altitude_km", "raan_offset_deg"),
            ints=("num_planes", "sats_per_plane", "phasing_factor"),
        )
        if cons.get("kind") == "position_table" and cons.get("path"):
            if not os.path.isabs(cons["path"]):
                cons["path"] = os.path.join(base_dir, cons["path"])
        constellation = ConstellationSpec(**cons)
        ues = _build_ues(doc["ues"])
        channel_doc = _coerce(
            doc.get("channel", {}),
            floats=(
                "carrier_hz",
                "sat_eirp_dbw",
                "ue_gain_over_temp_db_per_k",
                "bandwidth_max_hz",
                "shadowing_sigma_db",
                "noise_margin_db",
            ),
            ints=("seed",),
        )
        if "bandwidth_overrides_hz" in channel_doc:
            channel_doc["bandwidth_overrides_hz"] = {
                int(k): float(v) for k, v in channel_doc["bandwidth_overrides_hz"].items()
            }
        channel = ChannelParams(**channel_doc)
        utility_doc = _coerce(doc.get("utility", {}), floats=("alpha",))
        utility = UtilitySpec(**utility_doc)
        latency_doc = _coerce(
            doc.get("latency", {}),
            floats=("gs_cn_ms", "proc_ms", "rach_ms", "isl_hop_ms", "retune_ms"),
            ints=("opposite_penalty_hops",),
        )
        if "gs_positions" in latency_doc:
            latency_doc["gs_positions"] = tuple(
                tuple(float(v) for v in p) for p in latency_doc["gs_positions"]
            )
        latency = LatencyParams(**latency_doc)
    except TypeError as exc:
        raise ValidationError("scenario", f"bad config structure: {exc}") from exc
    return Scenario(
        time_grid=grid,
        constellation=constellation,
        ues=ues,
        min_elevation_deg=float(doc["min_elevation_deg"]),
        channel=channel,
        utility=utility,
        gamma=float(doc["gamma"]),
        latency=latency,
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    """Plain-dict form of a Scenario; inverse of scenario_from_dict."""

    def prune(d: dict) -> dict:
        return {k: v for k, v in d.items() if v is not None}

    doc = {
        "time_grid": asdict(scenario.time_grid),
        "constellation": prune(asdict(scenario.constellation)),
        "ues": prune(
            {
                "positions": [list(p) for p in scenario.ues.positions],
                "seed": scenario.ues.seed,
                "bbox": list(scenario.ues.bbox) if scenario.ues.bbox else None,
            }
        ),
        "min_elevation_deg": scenario.min_elevation_deg,
        "gamma": scenario.gamma,
        "channel": asdict(scenario.channel),
        "utility": asdict(scenario.utility),
        "latency": asdict(scenario.latency),
    }
    doc["latency"]["gs_positions"] = [list(p) for p in scenario.latency.gs_positions]
    return doc


def load_scenario(path: str) -> Scenario:
    """Load and validate a scenario config file."""
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return scenario_from_dict(doc, base_dir=os.path.dirname(os.path.abspath(path)))


def save_scenario(scenario: Scenario, path: str) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(scenario_to_dict(scenario), fh, sort_keys=True)


def scenario_digest(scenario: Scenario) -> str:
    """Stable content hash of a scenario's canonical form."""
    blob = json.dumps(scenario_to_dict(scenario), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def bundled_scenario_path(name: str) -> str:
    """Filesystem path of a scenario shipped with the package ('desk', 'golden')."""
    from importlib.resources import files

    path = files("leoho").joinpath("data", f"{name}.yaml")
    if not path.is_file():
        raise ValidationError("scenario", f"no bundled scenario named {name!r}")
    return str(path)
