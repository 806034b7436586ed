"""Deterministic discrete-time simulator of the low-altitude aerial network."""

from .params import (
    SimConfig,
    ChannelParams,
    EnergyParams,
    MobilityParams,
    TrafficClassConfig,
    Sector,
    InvalidConfigError,
    SPEED_OF_LIGHT,
)
from .channel import (
    path_loss,
    los_probability,
    achievable_rate_bps,
    noise_power_dbm,
    friis_reference_loss_db,
    DistanceBelowReferenceError,
)
from .energy import propulsion_power, remaining_endurance_s, ZeroPowerError
from .mobility import gauss_markov_step, kmeans_placement
from .world import (
    WorldState,
    Uav,
    GroundUser,
    LinkState,
    SimEvent,
    SlotReport,
    UserSlotStats,
    UavSlotStats,
    Assignment,
    UavCommand,
    AllocationDecision,
    init_world,
    UnknownTargetError,
    AllocationMismatchError,
    NoAllocationError,
    LATENCY_CAP_S,
)
from .scenario import Scenario, load_scenario, save_scenario, ScenarioInvalidError

__all__ = [
    "SimConfig",
    "ChannelParams",
    "EnergyParams",
    "MobilityParams",
    "TrafficClassConfig",
    "Sector",
    "InvalidConfigError",
    "SPEED_OF_LIGHT",
    "path_loss",
    "los_probability",
    "achievable_rate_bps",
    "noise_power_dbm",
    "friis_reference_loss_db",
    "DistanceBelowReferenceError",
    "propulsion_power",
    "remaining_endurance_s",
    "ZeroPowerError",
    "gauss_markov_step",
    "kmeans_placement",
    "WorldState",
    "Uav",
    "GroundUser",
    "LinkState",
    "SimEvent",
    "SlotReport",
    "UserSlotStats",
    "UavSlotStats",
    "Assignment",
    "UavCommand",
    "AllocationDecision",
    "init_world",
    "UnknownTargetError",
    "AllocationMismatchError",
    "NoAllocationError",
    "LATENCY_CAP_S",
    "Scenario",
    "load_scenario",
    "save_scenario",
    "ScenarioInvalidError",
]
