"""Configuration dataclasses for the low-altitude network simulator.

All values are SI unless the field name says otherwise (dB, dBm, Hz).
Defaults describe the post-disaster urban scenario: a 500 x 500 m area
served by 4 rotary-wing UAVs at 28 GHz with 400 MHz of spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Optional

SPEED_OF_LIGHT = 299_792_458.0
THERMAL_NOISE_DBM_PER_HZ = -174.0


class InvalidConfigError(ValueError):
    """A config invariant is violated; `field_name` says which one."""

    def __init__(self, field_name: str, message: str):
        self.field_name = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass
class Sector:
    """Named axis-aligned rectangle inside the deployment area."""

    name: str
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))


@dataclass
class ChannelParams:
    """Urban-micro style distance-power-law channel with LoS/NLoS split."""

    los_exponent: float = 2.1
    nlos_exponent: float = 3.5
    ref_loss_db: float = 61.391  # free-space loss at 1 m, 28 GHz
    shadowing_sigma_db: float = 0.0
    noise_figure_db: float = 7.0
    antenna_gain_db: float = 10.0
    los_coherence_slots: int = 100  # LoS/shadowing redraw interval

    def validate(self) -> None:
        if self.los_exponent <= 0:
            raise InvalidConfigError("los_exponent", "must be > 0")
        if self.nlos_exponent <= self.los_exponent:
            raise InvalidConfigError("nlos_exponent", "must exceed los_exponent")
        if self.ref_loss_db <= 0:
            raise InvalidConfigError("ref_loss_db", "must be > 0")
        if self.shadowing_sigma_db < 0:
            raise InvalidConfigError("shadowing_sigma_db", "must be >= 0")
        if self.los_coherence_slots < 1:
            raise InvalidConfigError("los_coherence_slots", "must be >= 1")


@dataclass
class EnergyParams:
    """Rotary-wing propulsion power-curve parameters.

    blade_profile_w, induced_w and tip_speed_mps are the quoted fleet
    constants; the remaining four close the blade-element/momentum curve
    and are overridable per scenario.
    """

    blade_profile_w: float = 79.8
    induced_w: float = 88.6
    tip_speed_mps: float = 120.0
    mean_rotor_induced_velocity_mps: float = 4.03
    fuselage_drag_ratio: float = 0.6
    air_density_kgm3: float = 1.225
    rotor_solidity: float = 0.05
    rotor_disc_area_m2: float = 0.503
    battery_capacity_j: float = 360_000.0

    def validate(self) -> None:
        for name in (
            "blade_profile_w",
            "induced_w",
            "tip_speed_mps",
            "mean_rotor_induced_velocity_mps",
            "fuselage_drag_ratio",
            "air_density_kgm3",
            "rotor_solidity",
            "rotor_disc_area_m2",
            "battery_capacity_j",
        ):
            if getattr(self, name) <= 0:
                raise InvalidConfigError(name, "must be > 0")
        if self.tip_speed_mps <= self.mean_rotor_induced_velocity_mps:
            raise InvalidConfigError(
                "tip_speed_mps", "must exceed mean_rotor_induced_velocity_mps"
            )


@dataclass
class MobilityParams:
    """First-order autoregressive (Gauss-Markov) speed/heading process."""

    memory_alpha: float = 0.85
    mean_speed_mps: float = 1.5
    speed_sigma: float = 0.5
    heading_sigma: float = 0.3

    def validate(self) -> None:
        if not 0.0 <= self.memory_alpha <= 1.0:
            raise InvalidConfigError("memory_alpha", "must be in [0, 1]")
        if self.mean_speed_mps < 0:
            raise InvalidConfigError("mean_speed_mps", "must be >= 0")
        if self.speed_sigma < 0:
            raise InvalidConfigError("speed_sigma", "must be >= 0")
        if self.heading_sigma < 0:
            raise InvalidConfigError("heading_sigma", "must be >= 0")


@dataclass
class TrafficClassConfig:
    """One user group: who they are, where they live, what they send.

    kind selects the generator:
      sar_urllc       periodic small packets with a hard per-packet deadline
      medical_video   constant bit rate stream
      civilian_bursty Poisson packet bursts
    """

    kind: str
    n_users: int
    sector: Optional[str] = None  # None: uniform over the whole area
    packet_bits: int = 2048
    packets_per_slot: float = 1.0  # periodic/CBR: exact; bursty: Poisson mean
    deadline_s: Optional[float] = None  # per-packet budget (URLLC)
    queue_cap_bits: Optional[int] = None  # arrivals beyond the cap are dropped
    mobility_scale: float = 1.0  # 0: stationary (e.g. hospital stations)

    KINDS = ("sar_urllc", "medical_video", "civilian_bursty")

    def validate(self) -> None:
        if self.kind not in self.KINDS:
            raise InvalidConfigError("kind", f"unknown traffic class {self.kind!r}")
        if self.n_users < 0:
            raise InvalidConfigError("n_users", "must be >= 0")
        if self.packet_bits <= 0:
            raise InvalidConfigError("packet_bits", "must be > 0")
        if self.packets_per_slot < 0:
            raise InvalidConfigError("packets_per_slot", "must be >= 0")
        if self.deadline_s is not None and self.deadline_s <= 0:
            raise InvalidConfigError("deadline_s", "must be > 0")
        if self.queue_cap_bits is not None and self.queue_cap_bits < 0:
            raise InvalidConfigError("queue_cap_bits", "must be >= 0")
        if self.mobility_scale < 0:
            raise InvalidConfigError("mobility_scale", "must be >= 0")

    @property
    def offered_bps(self) -> float:
        return self.packet_bits * self.packets_per_slot  # still per-slot; scaled by caller


@dataclass
class SimConfig:
    """Complete, validated simulator configuration."""

    area_side_m: float = 500.0
    n_uavs: int = 4
    slot_duration_s: float = 0.01
    carrier_hz: float = 28e9
    bandwidth_hz: float = 400e6
    n_prbs: int = 264
    seed: int = 0
    uav_altitude_m: float = 100.0
    min_altitude_m: float = 20.0
    max_altitude_m: float = 300.0
    uav_tx_power_dbm: float = 30.0
    prb_reuse: str = "full"  # "full": all UAVs share the grid; "partition": disjoint subgrids
    sectors: list[Sector] = field(default_factory=list)
    user_groups: list[TrafficClassConfig] = field(default_factory=list)
    channel: ChannelParams = field(default_factory=ChannelParams)
    energy: EnergyParams = field(default_factory=EnergyParams)
    mobility: MobilityParams = field(default_factory=MobilityParams)

    def validate(self) -> None:
        if self.area_side_m <= 0:
            raise InvalidConfigError("area_side_m", "must be > 0")
        if self.n_uavs < 1:
            raise InvalidConfigError("n_uavs", "must be >= 1")
        if self.slot_duration_s <= 0:
            raise InvalidConfigError("slot_duration_s", "must be > 0")
        if self.carrier_hz <= 0:
            raise InvalidConfigError("carrier_hz", "must be > 0")
        if self.n_prbs < 1:
            raise InvalidConfigError("n_prbs", "must be >= 1")
        if self.bandwidth_hz / self.n_prbs <= 0:
            raise InvalidConfigError("bandwidth_hz", "per-PRB bandwidth must be > 0")
        if not self.min_altitude_m <= self.uav_altitude_m <= self.max_altitude_m:
            raise InvalidConfigError(
                "uav_altitude_m", "must lie in [min_altitude_m, max_altitude_m]"
            )
        if self.prb_reuse not in ("full", "partition"):
            raise InvalidConfigError("prb_reuse", "must be 'full' or 'partition'")
        names = [s.name for s in self.sectors]
        if len(names) != len(set(names)):
            raise InvalidConfigError("sectors", "sector names must be unique")
        for s in self.sectors:
            if not (
                0 <= s.x_min < s.x_max <= self.area_side_m
                and 0 <= s.y_min < s.y_max <= self.area_side_m
            ):
                raise InvalidConfigError("sectors", f"sector {s.name!r} outside area")
        for g in self.user_groups:
            g.validate()
            if g.sector is not None and g.sector not in names:
                raise InvalidConfigError("user_groups", f"unknown sector {g.sector!r}")
        self.channel.validate()
        self.energy.validate()
        self.mobility.validate()

    @property
    def n_users(self) -> int:
        return sum(g.n_users for g in self.user_groups)

    @property
    def prb_bandwidth_hz(self) -> float:
        return self.bandwidth_hz / self.n_prbs

    def sector_of(self, x: float, y: float) -> Optional[str]:
        for s in self.sectors:
            if s.contains(x, y):
                return s.name
        return None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "SimConfig":
        raw = dict(raw)
        sectors = [Sector(**s) for s in raw.pop("sectors", [])]
        groups = [TrafficClassConfig(**g) for g in raw.pop("user_groups", [])]
        channel = ChannelParams(**raw.pop("channel", {}))
        energy = EnergyParams(**raw.pop("energy", {}))
        mobility = MobilityParams(**raw.pop("mobility", {}))
        cfg = cls(
            sectors=sectors,
            user_groups=groups,
            channel=channel,
            energy=energy,
            mobility=mobility,
            **raw,
        )
        cfg.validate()
        return cfg
