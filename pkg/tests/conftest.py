"""Shared fixtures: small deterministic scenarios with rich visibility.

The tiny constellation is a high-altitude equatorial-ish ring over UEs near
the equator, which keeps 2-3 satellites visible per slot so association
choices, handovers, and load balancing all occur at toy scale.
"""

from __future__ import annotations

import numpy as np
import pytest

from leoho.channel import ChannelParams, compute_rates
from leoho.geometry import build_visibility
from leoho.planner import AssociationPlan
from leoho.protosim import LatencyParams
from leoho.scenario import ConstellationSpec, Scenario, TimeGrid, synthesize_ues
from leoho.utility import UtilitySpec


def make_tiny_scenario(
    seed: int = 1,
    n_ues: int = 3,
    n_sats: int = 6,
    num_slots: int = 5,
    alpha: float = 1.0,
    gamma: float = 1e-2,
    shadowing_db: float = 3.0,
    min_elevation_deg: float = 12.0,
    slot_duration_s: float = 600.0,
    latency: LatencyParams | None = None,
) -> Scenario:
    return Scenario(
        time_grid=TimeGrid(num_slots=num_slots, slot_duration_s=slot_duration_s),
        constellation=ConstellationSpec(
            kind="walker_delta",
            num_planes=1,
            sats_per_plane=n_sats,
            inclination_deg=5.0,
            altitude_km=20000.0,
        ),
        ues=synthesize_ues(n_ues, (-3.0, 3.0, -10.0, 10.0), seed=seed),
        min_elevation_deg=min_elevation_deg,
        channel=ChannelParams(shadowing_sigma_db=shadowing_db, seed=seed + 100),
        utility=UtilitySpec(alpha=alpha),
        gamma=gamma,
        latency=latency or LatencyParams(),
    )


def make_random_table_scenario(
    directory,
    seed: int,
    n_ues: int = 3,
    n_sats: int = 4,
    num_slots: int = 6,
    gamma: float = 1e-2,
) -> Scenario:
    """Position-table scenario with rich visibility sets (3-4 sats per slot).

    Satellite 0 hovers over the region center so every slot stays feasible;
    the rest wander nearby, so brute-force enumeration spaces approach
    n_sats^num_slots.
    """
    from leoho.geometry import geodetic_to_ecef
    from leoho.scenario import ConstellationSpec

    rng = np.random.default_rng(seed)
    altitude_m = 20_000_000.0
    rows = ["slot,sat_id,x_km,y_km,z_km"]
    lat = rng.uniform(-25.0, 25.0, n_sats)
    lon = rng.uniform(-25.0, 25.0, n_sats)
    lat[0] = lon[0] = 0.0
    for t in range(num_slots):
        for sat in range(n_sats):
            drift = 0.0 if sat == 0 else rng.uniform(-4.0, 4.0)
            pos = geodetic_to_ecef(
                float(np.clip(lat[sat] + drift, -89.0, 89.0)),
                float(lon[sat] + (0.0 if sat == 0 else rng.uniform(-4.0, 4.0))),
                altitude_m,
            )
            rows.append(f"{t},{sat},{float(pos[0])!r},{float(pos[1])!r},{float(pos[2])!r}")
    path = str(directory / f"table_{seed}.csv")
    with open(path, "w") as fh:
        fh.write("\n".join(rows) + "\n")
    return Scenario(
        time_grid=TimeGrid(num_slots=num_slots, slot_duration_s=60.0),
        constellation=ConstellationSpec(kind="position_table", path=path),
        ues=synthesize_ues(n_ues, (-5.0, 5.0, -5.0, 5.0), seed=seed),
        min_elevation_deg=25.0,
        channel=ChannelParams(shadowing_sigma_db=4.0, seed=seed + 7),
        utility=UtilitySpec(alpha=1.0),
        gamma=gamma,
    )


def random_feasible_plan(vis, rng: np.random.Generator) -> AssociationPlan:
    serving = {}
    for ue in range(vis.num_ues):
        row = []
        for t in range(vis.num_slots):
            sats = vis.sats(ue, t)
            row.append(sats[rng.integers(len(sats))])
        serving[ue] = row
    return AssociationPlan(num_slots=vis.num_slots, serving=serving)


@pytest.fixture(scope="session")
def tiny_scenario():
    return make_tiny_scenario()


@pytest.fixture(scope="session")
def tiny_world(tiny_scenario):
    vis = build_visibility(tiny_scenario)
    rates = compute_rates(tiny_scenario, vis)
    return tiny_scenario, vis, rates
