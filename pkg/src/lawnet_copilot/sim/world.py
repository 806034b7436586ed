"""Deterministic discrete-time digital twin of the UAV-served disaster area.

The world advances one slot at a time under an externally supplied
allocation decision. Everything random flows from named child streams of
the scenario seed, so a (seed, call sequence) pair is bit-reproducible,
and forks re-seed their streams from an explicit branch label.

Slot order: UAV commands -> user mobility -> channel refresh (on coherence
epochs) -> traffic arrivals -> radio + queue service -> energy drain ->
event window bookkeeping -> report.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .params import SimConfig, InvalidConfigError, SPEED_OF_LIGHT
from .channel import (
    path_loss,
    los_probability,
    noise_power_dbm,
    dbm_to_mw,
    mw_to_dbm,
    achievable_rate_bps,
)
from .energy import propulsion_power, remaining_endurance_s
from .mobility import gauss_markov_step, advance_position, kmeans_placement

# stream tags feeding SeedSequence entropy; fixed forever for reproducibility
_STREAM_CHANNEL = 1
_STREAM_MOBILITY = 2
_STREAM_TRAFFIC = 3
_STREAM_PLACEMENT = 4

# stand-in for an unserved queue: finite, serializable, far above any budget
LATENCY_CAP_S = 1.0

UAV_MOVE_SPEED_MPS = 10.0  # nominal reposition speed used for energy booking


class UnknownTargetError(ValueError):
    """Event references a UAV, link, sector or group that does not exist."""


class AllocationMismatchError(ValueError):
    """Allocation references users/UAVs missing from this world."""


class NoAllocationError(ValueError):
    """SINR queried for a user holding zero PRBs in this slot."""


@dataclass
class SimEvent:
    """Scripted disturbance over a slot window (inclusive bounds).

    kind:
      excess_attenuation  extra dB on the target UAV's access links; clears
                          while the UAV flies above `ceiling_m`
      uav_failure         target UAV is non-operational during the window
      user_surge          traffic multiplier on a sector or group
    """

    kind: str
    target: str
    magnitude: float
    start_slot: int
    end_slot: int
    ceiling_m: Optional[float] = None
    event_id: str = ""

    KINDS = ("excess_attenuation", "uav_failure", "user_surge")

    def validate(self) -> None:
        if self.kind not in self.KINDS:
            raise InvalidConfigError("kind", f"unknown event kind {self.kind!r}")
        if self.start_slot > self.end_slot:
            raise InvalidConfigError("start_slot", "must be <= end_slot")

    def active_at(self, slot: int) -> bool:
        return self.start_slot <= slot <= self.end_slot

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Uav:
    id: str
    position: list[float]  # [x, y, z] in metres
    battery_j: float
    tx_power_dbm: float
    role: str = "access"  # "access" | "backhaul-relay"
    operational: bool = True
    failed_by_event: bool = False
    backhaul_via: Optional[str] = None  # relay UAV id, None = direct to core
    target_position: Optional[list[float]] = None
    last_move_m: float = 0.0

    @property
    def altitude_m(self) -> float:
        return self.position[2]


@dataclass
class GroundUser:
    id: str
    position: list[float]  # [x, y]
    speed: float
    heading: float
    mean_heading: float
    group: str
    group_index: int
    home_sector: Optional[str] = None
    serving_uav: str = ""
    queue_bits: int = 0
    sector: Optional[str] = None


@dataclass
class LinkState:
    uav_id: str
    user_id: str
    distance_3d_m: float
    los: bool
    shadowing_db: float
    excess_attenuation_db: float
    path_loss_db: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Assignment:
    user_id: str
    uav_id: str
    prbs: list[int]
    tx_power_dbm: Optional[float] = None  # None: UAV default


@dataclass
class UavCommand:
    """One world mutation taking effect at the next step.

    kind: "altitude_delta" (value = metres), "waypoint" (value = [x, y, z]),
    "tx_power_dbm" (absolute), "reattach" (value = user id list, target UAV
    is `uav_id`), "set_role" (value = role string) or "set_relay"
    (value = relay UAV id or None).
    """

    uav_id: str
    kind: str
    value: object

    def to_dict(self) -> dict:
        return {"uav_id": self.uav_id, "kind": self.kind, "value": self.value}


@dataclass
class AllocationDecision:
    slot: int
    assignments: list[Assignment] = field(default_factory=list)
    uav_commands: list[UavCommand] = field(default_factory=list)

    def prbs_of(self, user_id: str) -> list[int]:
        for a in self.assignments:
            if a.user_id == user_id:
                return a.prbs
        return []

    def to_dict(self) -> dict:
        return {
            "slot": self.slot,
            "assignments": [asdict(a) for a in self.assignments],
            "uav_commands": [c.to_dict() for c in self.uav_commands],
        }


@dataclass
class UserSlotStats:
    user_id: str
    group: str
    sector: Optional[str]
    home_sector: Optional[str]
    serving_uav: str
    n_prbs: int
    sinr_db: Optional[float]
    rate_bps: float
    generated_bits: int
    served_bits: int
    dropped_bits: int
    queue_bits: int
    latency_s: float
    deadline_hits: int
    deadline_misses: int


@dataclass
class UavSlotStats:
    uav_id: str
    x: float
    y: float
    altitude_m: float
    operational: bool
    moved_m: float
    propulsion_j: float
    tx_j: float
    battery_j: float
    endurance_s: float
    backhaul_utilization: float
    backhaul_latency_s: float


@dataclass
class SlotReport:
    slot: int
    users: list[UserSlotStats]
    uavs: list[UavSlotStats]
    active_events: list[str]

    def to_dict(self) -> dict:
        return {
            "slot": self.slot,
            "users": [asdict(u) for u in self.users],
            "uavs": [asdict(v) for v in self.uavs],
            "active_events": list(self.active_events),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SlotReport":
        return cls(
            slot=raw["slot"],
            users=[UserSlotStats(**u) for u in raw["users"]],
            uavs=[UavSlotStats(**v) for v in raw["uavs"]],
            active_events=list(raw["active_events"]),
        )


def _make_stream(seed: int, tag: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, tag) + tuple(extra)))


def _channel_draw(
    seed: int, branch: tuple[int, ...], epoch: int, uav_idx: int, user_idx: int
) -> np.random.Generator:
    # keyed, order-independent: any caller gets the same draw for the tuple
    return np.random.default_rng(
        np.random.SeedSequence((seed, _STREAM_CHANNEL) + branch + (epoch, uav_idx, user_idx))
    )


@dataclass
class ChannelDraw:
    los: bool
    shadowing_db: float


class WorldState:
    """Mutable simulator state. One writer at a time; use fork() for what-ifs."""

    def __init__(self, config: SimConfig):
        config.validate()
        self.config = config
        self.clock_slot = 0
        self.branch: tuple[int, ...] = ()
        self.uavs: list[Uav] = []
        self.users: list[GroundUser] = []
        self.pending_events: list[SimEvent] = []
        self.channel_draws: dict[tuple[str, str], ChannelDraw] = {}
        self.attachment_overrides: dict[str, str] = {}
        self.backhaul_capacity_bps = 2e9
        self.backhaul_base_latency_s = 2e-4
        self._event_counter = 0
        self.rng_mobility = _make_stream(config.seed, _STREAM_MOBILITY)
        self.rng_traffic = _make_stream(config.seed, _STREAM_TRAFFIC)
        self._uav_index = {}
        self._user_index = {}
        self._last_backhaul: dict[str, tuple[float, float]] = {}

    # ------------------------------------------------------------------ setup

    def _reindex(self) -> None:
        self._uav_index = {u.id: i for i, u in enumerate(self.uavs)}
        self._user_index = {u.id: i for i, u in enumerate(self.users)}

    def uav(self, uav_id: str) -> Uav:
        try:
            return self.uavs[self._uav_index[uav_id]]
        except KeyError:
            raise UnknownTargetError(f"no such UAV {uav_id!r}") from None

    def user(self, user_id: str) -> GroundUser:
        try:
            return self.users[self._user_index[user_id]]
        except KeyError:
            raise UnknownTargetError(f"no such user {user_id!r}") from None

    # ---------------------------------------------------------------- channel

    def coherence_epoch(self, slot: Optional[int] = None) -> int:
        s = self.clock_slot if slot is None else slot
        return s // self.config.channel.los_coherence_slots

    def refresh_channel(self) -> None:
        """Redraw LoS state and shadowing for every UAV-user pair."""
        epoch = self.coherence_epoch()
        params = self.config.channel
        for i, uav in enumerate(self.uavs):
            for j, user in enumerate(self.users):
                rng = _channel_draw(self.config.seed, self.branch, epoch, i, j)
                d2d = math.hypot(
                    uav.position[0] - user.position[0], uav.position[1] - user.position[1]
                )
                p_los = los_probability(d2d)
                los = bool(rng.random() < p_los)
                shadow = (
                    float(rng.standard_normal() * params.shadowing_sigma_db)
                    if params.shadowing_sigma_db > 0
                    else 0.0
                )
                self.channel_draws[(uav.id, user.id)] = ChannelDraw(los, shadow)

    def distance_3d(self, uav: Uav, user: GroundUser) -> float:
        return math.sqrt(
            (uav.position[0] - user.position[0]) ** 2
            + (uav.position[1] - user.position[1]) ** 2
            + uav.position[2] ** 2
        )

    def excess_attenuation_db(self, uav: Uav, user: GroundUser) -> float:
        total = 0.0
        for ev in self.pending_events:
            if ev.kind != "excess_attenuation" or not ev.active_at(self.clock_slot):
                continue
            if ev.target != uav.id and ev.target != f"{uav.id}:{user.id}":
                continue
            if ev.ceiling_m is not None and uav.altitude_m > ev.ceiling_m:
                continue  # flying above the plume clears the loss
            total += ev.magnitude
        return total

    def link_state(self, uav_id: str, user_id: str) -> LinkState:
        uav = self.uav(uav_id)
        user = self.user(user_id)
        draw = self.channel_draws.get((uav_id, user_id)) or ChannelDraw(True, 0.0)
        d3 = max(1.0, self.distance_3d(uav, user))
        excess = self.excess_attenuation_db(uav, user)
        pl = path_loss(d3, draw.los, self.config.channel, draw.shadowing_db)
        return LinkState(uav_id, user_id, d3, draw.los, draw.shadowing_db, excess, pl)

    def per_prb_tx_offset_db(self) -> float:
        # total transmit power spreads uniformly over the PRB grid
        return 10.0 * math.log10(self.config.n_prbs)

    def rx_power_dbm(self, uav: Uav, user: GroundUser, tx_power_dbm: Optional[float] = None) -> float:
        """Received power per PRB (the SINR bookkeeping unit)."""
        link = self.link_state(uav.id, user.id)
        tx = uav.tx_power_dbm if tx_power_dbm is None else tx_power_dbm
        return (
            tx
            - self.per_prb_tx_offset_db()
            + self.config.channel.antenna_gain_db
            - link.path_loss_db
            - link.excess_attenuation_db
        )

    def rx_matrix_dbm(self) -> np.ndarray:
        """Vectorized received power [uav, user] at each UAV's default power.

        Equivalent to rx_power_dbm over all pairs; kept in lockstep with it
        (a property test pins the equality).
        """
        n_u, n_g = len(self.uavs), len(self.users)
        if n_u == 0 or n_g == 0:
            return np.zeros((n_u, n_g))
        params = self.config.channel
        upos = np.array([u.position for u in self.uavs])  # (U, 3)
        gpos = np.array([g.position for g in self.users])  # (N, 2)
        dx = upos[:, 0][:, None] - gpos[:, 0][None, :]
        dy = upos[:, 1][:, None] - gpos[:, 1][None, :]
        d3 = np.sqrt(dx * dx + dy * dy + (upos[:, 2] ** 2)[:, None])
        d3 = np.maximum(d3, 1.0)
        los = np.ones((n_u, n_g), dtype=bool)
        shadow = np.zeros((n_u, n_g))
        for i, uav in enumerate(self.uavs):
            for j, user in enumerate(self.users):
                draw = self.channel_draws.get((uav.id, user.id))
                if draw is not None:
                    los[i, j] = draw.los
                    shadow[i, j] = draw.shadowing_db
        exponent = np.where(los, params.los_exponent, params.nlos_exponent)
        pl = params.ref_loss_db + 10.0 * exponent * np.log10(d3) + shadow
        att = np.zeros((n_u, n_g))
        for ev in self.pending_events:
            if ev.kind != "excess_attenuation" or not ev.active_at(self.clock_slot):
                continue
            base = ev.target.split(":")[0]
            if base not in self._uav_index:
                continue
            i = self._uav_index[base]
            if ev.ceiling_m is not None and self.uavs[i].altitude_m > ev.ceiling_m:
                continue
            if ":" in ev.target:
                j = self._user_index.get(ev.target.split(":")[1])
                if j is not None:
                    att[i, j] += ev.magnitude
            else:
                att[i, :] += ev.magnitude
        tx = np.array([u.tx_power_dbm for u in self.uavs]) - self.per_prb_tx_offset_db()
        return tx[:, None] + params.antenna_gain_db - pl - att

    def allowed_prbs(self, uav_id: str) -> list[int]:
        """PRB indices the UAV may schedule (whole grid, or its partition)."""
        n = self.config.n_prbs
        if self.config.prb_reuse == "full":
            return list(range(n))
        i = self._uav_index[uav_id]
        k = self.config.n_uavs
        lo = (n * i) // k
        hi = (n * (i + 1)) // k
        return list(range(lo, hi))

    # ------------------------------------------------------------- attachment

    def reattach_users(self) -> None:
        """Attach every user to the operational UAV with the least path loss.

        Pinned attachments (reattach commands) win while their UAV is up.
        """
        ops = [u for u in self.uavs if u.operational]
        if not ops:
            for user in self.users:
                user.serving_uav = ""
            return
        op_ids = {u.id for u in ops}
        for user in self.users:
            pinned = self.attachment_overrides.get(user.id)
            if pinned in op_ids:
                user.serving_uav = pinned
                continue
            best, best_loss = None, math.inf
            for uav in ops:
                link = self.link_state(uav.id, user.id)
                loss = link.path_loss_db + link.excess_attenuation_db
                if loss < best_loss:
                    best, best_loss = uav.id, loss
            user.serving_uav = best

    # ------------------------------------------------------------------ radio

    def slot_radio(
        self, allocation: AllocationDecision, validated: bool = False
    ) -> dict[str, tuple[float, float]]:
        """Per-user (mean linear SINR in dB, achievable rate in bps).

        Interference is booked per PRB: a UAV radiates on every PRB it
        assigned this slot, and a victim sums co-PRB received powers from
        all other UAVs.
        """
        cfg = self.config
        prb_bw = cfg.prb_bandwidth_hz
        noise_dbm = noise_power_dbm(prb_bw, cfg.channel.noise_figure_db)
        noise_mw = dbm_to_mw(noise_dbm)

        assignments = (
            allocation.assignments if validated else self.assignments_valid(allocation)
        )
        occupancy = np.zeros((len(self.uavs), cfg.n_prbs), dtype=bool)
        for a in assignments:
            ui = self._uav_index[a.uav_id]
            occupancy[ui, a.prbs] = True

        # received power matrix [uav, user] in mW at the UAV's default power
        rx_mw = 10.0 ** (self.rx_matrix_dbm() / 10.0)
        for i, uav in enumerate(self.uavs):
            if not uav.operational:
                rx_mw[i, :] = 0.0

        out: dict[str, tuple[float, float]] = {}
        for a in assignments:
            ui = self._uav_index[a.uav_id]
            uj = self._user_index[a.user_id]
            uav = self.uavs[ui]
            if not uav.operational or not a.prbs:
                out[a.user_id] = (-math.inf, 0.0)
                continue
            sig_mw = rx_mw[ui, uj]
            if a.tx_power_dbm is not None:
                sig_mw = dbm_to_mw(
                    self.rx_power_dbm(uav, self.users[uj], a.tx_power_dbm)
                )
            prbs = np.asarray(a.prbs)
            interf = occupancy[:, prbs].astype(float) * rx_mw[:, uj][:, None]
            interf[ui, :] = 0.0
            denom = interf.sum(axis=0) + noise_mw
            sinr_lin = sig_mw / denom
            rate = float(prb_bw * np.log2(1.0 + sinr_lin).sum())
            out[a.user_id] = (mw_to_dbm(float(sinr_lin.mean())), rate)
        return out

    def sinr_for_user(self, user_id: str, allocation: AllocationDecision) -> float:
        """Mean-linear SINR in dB of the user's allocation this slot."""
        radio = self.slot_radio(allocation)
        if user_id not in radio or not allocation.prbs_of(user_id):
            raise NoAllocationError(f"user {user_id!r} holds no PRBs this slot")
        return radio[user_id][0]

    def assignments_valid(self, allocation: AllocationDecision) -> list[Assignment]:
        seen_prbs: dict[str, set] = {}
        for a in allocation.assignments:
            if a.user_id not in self._user_index:
                raise AllocationMismatchError(f"unknown user {a.user_id!r}")
            if a.uav_id not in self._uav_index:
                raise AllocationMismatchError(f"unknown UAV {a.uav_id!r}")
            if a.prbs and (min(a.prbs) < 0 or max(a.prbs) >= self.config.n_prbs):
                raise AllocationMismatchError("PRB index out of range")
            taken = seen_prbs.setdefault(a.uav_id, set())
            mine = set(a.prbs)
            dup = taken & mine
            if dup:
                raise AllocationMismatchError(
                    f"PRBs {sorted(dup)} assigned twice on {a.uav_id}"
                )
            taken |= mine
        return allocation.assignments

    # ----------------------------------------------------------------- events

    def inject_event(self, event: SimEvent) -> str:
        event.validate()
        if event.kind in ("excess_attenuation", "uav_failure"):
            base = event.target.split(":")[0]
            self.uav(base)  # raises UnknownTargetError
            if ":" in event.target:
                self.user(event.target.split(":")[1])
        elif event.kind == "user_surge":
            known = {s.name for s in self.config.sectors} | {
                g.kind for g in self.config.user_groups
            }
            if event.target not in known:
                raise UnknownTargetError(f"no such sector or group {event.target!r}")
        if not event.event_id:
            event.event_id = f"ev-{self._event_counter:03d}"
        self._event_counter += 1
        self.pending_events.append(event)
        return event.event_id

    def active_events(self) -> list[SimEvent]:
        return [e for e in self.pending_events if e.active_at(self.clock_slot)]

    def _surge_multiplier(self, user: GroundUser) -> float:
        m = 1.0
        for ev in self.active_events():
            if ev.kind != "user_surge":
                continue
            if ev.target == user.group or (user.sector and ev.target == user.sector):
                m *= ev.magnitude
        return m

    # ------------------------------------------------------------------- step

    def step(self, allocation: AllocationDecision) -> "SlotReport":
        """Advance one slot in place and return the slot's KPI report."""
        cfg = self.config
        dt = cfg.slot_duration_s
        self.assignments_valid(allocation)

        # 1. pending UAV commands take effect at the top of the slot
        for u in self.uavs:
            u.last_move_m = 0.0
        for cmd in allocation.uav_commands:
            self._apply_command(cmd)

        # 2. event-driven operational state
        failed = {
            e.target
            for e in self.active_events()
            if e.kind == "uav_failure"
        }
        for u in self.uavs:
            u.failed_by_event = u.id in failed
            u.operational = (not u.failed_by_event) and u.battery_j > 0.0

        # 3. ground-user mobility (fixed draw order: user list order; the
        #    rng advances for stationary users too, so draw counts never
        #    depend on group configuration)
        for user in self.users:
            user.speed, user.heading = gauss_markov_step(
                user.speed, user.heading, cfg.mobility, self.rng_mobility, user.mean_heading
            )
            scale = cfg.user_groups[user.group_index].mobility_scale
            if scale > 0.0:
                x, y = advance_position(
                    user.position[0],
                    user.position[1],
                    user.speed * scale,
                    user.heading,
                    dt,
                    cfg.area_side_m,
                )
                user.position[0], user.position[1] = x, y
                user.sector = cfg.sector_of(x, y)

        # 4. channel refresh + reattachment on coherence epochs, or when the
        #    serving UAV went down
        if self.clock_slot % cfg.channel.los_coherence_slots == 0:
            self.refresh_channel()
            self.reattach_users()
        else:
            down = {u.id for u in self.uavs if not u.operational}
            if any(u.serving_uav in down or not u.serving_uav for u in self.users):
                self.reattach_users()

        # 5. traffic arrivals (integer bits; drop above the class queue cap)
        generated: dict[str, int] = {}
        dropped: dict[str, int] = {}
        queue_before: dict[str, int] = {}
        for user in self.users:
            g = cfg.user_groups[user.group_index]
            mult = self._surge_multiplier(user)
            if g.kind == "civilian_bursty":
                n_pkts = int(self.rng_traffic.poisson(g.packets_per_slot * mult))
            else:
                n_pkts = int(round(g.packets_per_slot * mult))
            bits = n_pkts * g.packet_bits
            queue_before[user.id] = user.queue_bits
            drop = 0
            new_queue = user.queue_bits + bits
            if g.queue_cap_bits is not None and new_queue > g.queue_cap_bits:
                drop = new_queue - g.queue_cap_bits
                new_queue = g.queue_cap_bits
            user.queue_bits = new_queue
            generated[user.id] = bits
            dropped[user.id] = drop

        # 6. radio + queue service
        radio = self.slot_radio(allocation, validated=True)
        per_user_assign = {a.user_id: a for a in allocation.assignments}
        user_stats: list[UserSlotStats] = []
        served_per_uav: dict[str, int] = {u.id: 0 for u in self.uavs}
        tx_j: dict[str, float] = {u.id: 0.0 for u in self.uavs}
        for user in self.users:
            g = cfg.user_groups[user.group_index]
            a = per_user_assign.get(user.id)
            sinr, rate = radio.get(user.id, (None, 0.0))
            serving = a.uav_id if a else user.serving_uav
            capacity_bits = int(rate * dt)
            served = min(user.queue_bits, capacity_bits)
            user.queue_bits -= served
            served_per_uav[serving] = served_per_uav.get(serving, 0) + served

            # intra-slot analytic latency: wait behind the standing queue,
            # then one packet's transmission, then propagation
            backlog = queue_before[user.id]
            if rate > 0:
                uav = self.uav(a.uav_id) if a else None
                dist = self.distance_3d(uav, user) if uav else 0.0
                latency = backlog / rate + g.packet_bits / rate + dist / SPEED_OF_LIGHT
                latency = min(latency, LATENCY_CAP_S)
            else:
                latency = LATENCY_CAP_S if (backlog + generated[user.id]) > 0 else 0.0

            hits = misses = 0
            if g.kind == "sar_urllc" and g.deadline_s is not None and generated[user.id] > 0:
                n_pkts = generated[user.id] // g.packet_bits
                if latency <= g.deadline_s:
                    hits = n_pkts
                else:
                    misses = n_pkts

            if a is not None and a.prbs:
                uav = self.uav(a.uav_id)
                tx_dbm = a.tx_power_dbm if a.tx_power_dbm is not None else uav.tx_power_dbm
                # PA energy scales with the share of the grid in use
                tx_j[a.uav_id] += dbm_to_mw(tx_dbm) / 1000.0 * (len(a.prbs) / cfg.n_prbs) * dt

            user_stats.append(
                UserSlotStats(
                    user_id=user.id,
                    group=user.group,
                    sector=user.sector,
                    home_sector=user.home_sector,
                    serving_uav=serving,
                    n_prbs=len(a.prbs) if a else 0,
                    sinr_db=None if sinr in (None, -math.inf) else round(sinr, 6),
                    rate_bps=rate,
                    generated_bits=generated[user.id],
                    served_bits=served,
                    dropped_bits=dropped[user.id],
                    queue_bits=user.queue_bits,
                    latency_s=latency,
                    deadline_hits=hits,
                    deadline_misses=misses,
                )
            )

        # 7. energy drain and endurance
        uav_stats: list[UavSlotStats] = []
        for uav in self.uavs:
            hover_p = propulsion_power(0.0, cfg.energy)
            if uav.last_move_m > 0:
                move_t = uav.last_move_m / UAV_MOVE_SPEED_MPS
                prop_j = propulsion_power(UAV_MOVE_SPEED_MPS, cfg.energy) * move_t + hover_p * max(
                    0.0, dt - move_t
                )
            else:
                prop_j = hover_p * dt
            if not uav.operational and uav.battery_j <= 0:
                prop_j = 0.0  # dead UAVs are down, not draining
            drain = prop_j + tx_j[uav.id]
            uav.battery_j = max(0.0, uav.battery_j - drain)
            # endurance against the sustained draw; a one-slot reposition
            # spike says nothing about how long the battery lasts
            sustained_w = hover_p + (tx_j[uav.id] / dt if dt > 0 else 0.0)
            endurance = (
                remaining_endurance_s(uav.battery_j, sustained_w)
                if sustained_w > 0
                else 0.0
            )
            if uav.battery_j <= 0:
                uav.operational = False

            relayed = served_per_uav.get(uav.id, 0)
            util = min(1.0, (relayed / dt) / self.backhaul_capacity_bps)
            bh_latency = self.backhaul_base_latency_s / max(1e-9, 1.0 - min(util, 0.999))
            self._last_backhaul[uav.id] = (util, bh_latency)
            uav_stats.append(
                UavSlotStats(
                    uav_id=uav.id,
                    x=uav.position[0],
                    y=uav.position[1],
                    altitude_m=uav.position[2],
                    operational=uav.operational,
                    moved_m=uav.last_move_m,
                    propulsion_j=prop_j,
                    tx_j=tx_j[uav.id],
                    battery_j=uav.battery_j,
                    endurance_s=endurance,
                    backhaul_utilization=util,
                    backhaul_latency_s=bh_latency,
                )
            )

        report = SlotReport(
            slot=self.clock_slot,
            users=user_stats,
            uavs=uav_stats,
            active_events=[e.event_id for e in self.active_events()],
        )
        self.clock_slot += 1
        return report

    def _apply_command(self, cmd: UavCommand) -> None:
        uav = self.uav(cmd.uav_id)
        cfg = self.config
        if cmd.kind == "altitude_delta":
            old = list(uav.position)
            new_alt = min(max(uav.position[2] + float(cmd.value), cfg.min_altitude_m), cfg.max_altitude_m)
            uav.position[2] = new_alt
            uav.last_move_m += abs(new_alt - old[2])
        elif cmd.kind == "waypoint":
            tgt = [float(v) for v in cmd.value]
            tgt[0] = min(max(tgt[0], 0.0), cfg.area_side_m)
            tgt[1] = min(max(tgt[1], 0.0), cfg.area_side_m)
            tgt[2] = min(max(tgt[2], cfg.min_altitude_m), cfg.max_altitude_m)
            uav.last_move_m += math.dist(uav.position, tgt)
            uav.position = tgt
        elif cmd.kind == "tx_power_dbm":
            uav.tx_power_dbm = float(cmd.value)
        elif cmd.kind == "reattach":
            for uid in cmd.value:
                self.user(uid).serving_uav = uav.id
                self.attachment_overrides[uid] = uav.id
        elif cmd.kind == "set_role":
            uav.role = str(cmd.value)
        elif cmd.kind == "set_relay":
            uav.backhaul_via = cmd.value
        else:
            raise AllocationMismatchError(f"unknown command kind {cmd.kind!r}")

    # ------------------------------------------------------------------- fork

    def fork(self, branch_seed: int = 0) -> "WorldState":
        """Deep, independent what-if copy with a re-seeded rng branch."""
        twin = copy.deepcopy(self)
        twin.branch = self.branch + (branch_seed,)
        twin.rng_mobility = _make_stream(
            self.config.seed, _STREAM_MOBILITY, self.clock_slot, *twin.branch
        )
        twin.rng_traffic = _make_stream(
            self.config.seed, _STREAM_TRAFFIC, self.clock_slot, *twin.branch
        )
        return twin

    # -------------------------------------------------------------- serialize

    def to_dict(self) -> dict:
        return {
            "clock_slot": self.clock_slot,
            "branch": list(self.branch),
            "config": self.config.to_dict(),
            "uavs": [asdict(u) for u in self.uavs],
            "users": [asdict(u) for u in self.users],
            "pending_events": [e.to_dict() for e in self.pending_events],
            "attachment_overrides": dict(sorted(self.attachment_overrides.items())),
            "channel_draws": {
                f"{k[0]}|{k[1]}": [int(v.los), v.shadowing_db]
                for k, v in sorted(self.channel_draws.items())
            },
            "rng": {
                "mobility": _state_of(self.rng_mobility),
                "traffic": _state_of(self.rng_traffic),
            },
        }

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _state_of(gen: np.random.Generator) -> dict:
    st = gen.bit_generator.state
    return {"state": str(st["state"]["state"]), "inc": str(st["state"]["inc"])}


def init_world(config: SimConfig) -> WorldState:
    """Seeded initial world: users drawn per group, UAVs at k-means centroids."""
    config.validate()
    world = WorldState(config)
    place_rng = _make_stream(config.seed, _STREAM_PLACEMENT)

    users: list[GroundUser] = []
    uid = 0
    for gi, group in enumerate(config.user_groups):
        sector = next((s for s in config.sectors if s.name == group.sector), None)
        for _ in range(group.n_users):
            if sector is not None:
                x = float(place_rng.uniform(sector.x_min, sector.x_max))
                y = float(place_rng.uniform(sector.y_min, sector.y_max))
            else:
                x = float(place_rng.uniform(0, config.area_side_m))
                y = float(place_rng.uniform(0, config.area_side_m))
            heading = float(place_rng.uniform(0, 2 * math.pi))
            users.append(
                GroundUser(
                    id=f"u-{uid:03d}",
                    position=[x, y],
                    speed=config.mobility.mean_speed_mps,
                    heading=heading,
                    mean_heading=heading,
                    group=group.kind,
                    group_index=gi,
                    home_sector=group.sector,
                    sector=config.sector_of(x, y),
                )
            )
            uid += 1
    world.users = users

    xy = np.array([[u.position[0], u.position[1]] for u in users]) if users else np.zeros((0, 2))
    centers = kmeans_placement(xy, config.n_uavs, config.area_side_m, place_rng)
    # stable ordering: sort centroids by (x, y) so UAV ids do not depend on
    # k-means initialization order
    order = np.lexsort((centers[:, 1], centers[:, 0]))
    world.uavs = [
        Uav(
            id=f"uav-{i}",
            position=[float(centers[o][0]), float(centers[o][1]), config.uav_altitude_m],
            battery_j=config.energy.battery_capacity_j,
            tx_power_dbm=config.uav_tx_power_dbm,
        )
        for i, o in enumerate(order)
    ]
    world._reindex()
    world.refresh_channel()
    world.reattach_users()
    return world
