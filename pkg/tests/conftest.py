"""Shared fixtures: miniature hand-built worlds and the demo scenario."""

from __future__ import annotations

import pytest

from lawnet_copilot.sim import (
    SimConfig,
    Sector,
    TrafficClassConfig,
    ChannelParams,
    init_world,
)
from lawnet_copilot.sim.world import WorldState, Uav, GroundUser, ChannelDraw
from lawnet_copilot.sim.scenario import load_scenario, builtin_scenario_path


def small_config(seed: int = 7, **overrides) -> SimConfig:
    base = dict(
        area_side_m=400.0,
        n_uavs=2,
        n_prbs=16,
        seed=seed,
        prb_reuse="partition",
        channel=ChannelParams(antenna_gain_db=20.0),
        sectors=[
            Sector("A", 20.0, 20.0, 180.0, 180.0),
            Sector("B", 220.0, 220.0, 380.0, 380.0),
        ],
        user_groups=[
            TrafficClassConfig(
                kind="sar_urllc",
                n_users=2,
                sector="A",
                packet_bits=2048,
                packets_per_slot=2.0,
                deadline_s=0.001,
            ),
            TrafficClassConfig(
                kind="medical_video",
                n_users=2,
                sector="B",
                packet_bits=50000,
                packets_per_slot=4.0,
            ),
            TrafficClassConfig(
                kind="civilian_bursty",
                n_users=2,
                sector=None,
                packet_bits=8192,
                packets_per_slot=0.5,
            ),
        ],
    )
    base.update(overrides)
    return SimConfig(**base)


@pytest.fixture
def small_world() -> WorldState:
    return init_world(small_config())


def two_cell_world(
    d_between_m: float = 300.0,
    alt_m: float = 100.0,
    n_prbs: int = 16,
    tx_dbm: float = 30.0,
) -> WorldState:
    """Two UAVs on the x-axis, one user under each; forced LoS, no shadow."""
    cfg = SimConfig(
        area_side_m=max(500.0, d_between_m + 100.0),
        n_uavs=2,
        n_prbs=n_prbs,
        seed=1,
        uav_tx_power_dbm=tx_dbm,
        user_groups=[
            TrafficClassConfig(
                kind="medical_video", n_users=2, packet_bits=50000, packets_per_slot=4.0
            )
        ],
        channel=ChannelParams(shadowing_sigma_db=0.0),
    )
    world = WorldState(cfg)
    world.uavs = [
        Uav(id="uav-0", position=[50.0, 0.0, alt_m], battery_j=cfg.energy.battery_capacity_j, tx_power_dbm=tx_dbm),
        Uav(id="uav-1", position=[50.0 + d_between_m, 0.0, alt_m], battery_j=cfg.energy.battery_capacity_j, tx_power_dbm=tx_dbm),
    ]
    world.users = [
        GroundUser(
            id="u-000", position=[50.0, 0.0], speed=0.0, heading=0.0,
            mean_heading=0.0, group="medical_video", group_index=0,
            serving_uav="uav-0",
        ),
        GroundUser(
            id="u-001", position=[50.0 + d_between_m, 0.0], speed=0.0, heading=0.0,
            mean_heading=0.0, group="medical_video", group_index=0,
            serving_uav="uav-1",
        ),
    ]
    world._reindex()
    for uav in world.uavs:
        for user in world.users:
            world.channel_draws[(uav.id, user.id)] = ChannelDraw(True, 0.0)
    return world


@pytest.fixture
def demo_scenario():
    return load_scenario(builtin_scenario_path("seismic_response.json"))
