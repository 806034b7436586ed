"""Per-slot radio resource allocation under comparable scheduling schemes.

Three deterministic schemes share one entry point:

  round_robin        deal PRBs to users in rotation, blind to class weights
  max_sinr           every PRB goes to the best-estimated-SINR user
  intent_weighted_pf weight * instantaneous_rate / EMA-throughput ranking,
                     with deadline-class users pre-empting up to half the
                     grid until their latency budget is met

External policies (e.g. an RL agent behind the gateway) can be registered
as additional schemes without touching the core.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional

import numpy as np

from .sim.params import TrafficClassConfig
from .sim.channel import noise_power_dbm
from .sim.world import WorldState, AllocationDecision, Assignment

SCHEMES = ("round_robin", "max_sinr", "intent_weighted_pf")

# URLLC pre-emption never takes more than this share of one UAV's grid,
# so throughput classes cannot be starved outright
PREEMPTION_CAP = 0.5

# deadline users are sized to finish inside this fraction of their budget;
# sizing at exactly 1.0 parks latency on the bound and float jitter flips it
DEADLINE_MARGIN = 0.5

EMA_HORIZON_SLOTS = 100
WEIGHT_CLIP_LOW = 0.1
WEIGHT_CLIP_HIGH = 10.0


class UnknownClassError(ValueError):
    """Feedback references a traffic class or sector nobody declared."""


class EmptyWorldError(ValueError):
    """Allocation requested for a world without users or operational UAVs."""


def _scope_key(sector: Optional[str], traffic_class: str) -> str:
    return f"{sector or '*'}/{traffic_class}"


@dataclass
class IntentWeights:
    """Machine-checkable allocation objective derived from an intent.

    class_priority keys are "<sector>/<class>" with "*" as the any-sector
    wildcard. Budgets and rate floors are per class.
    """

    class_priority: dict[str, float] = field(default_factory=dict)
    latency_budget_s: dict[str, float] = field(default_factory=dict)
    min_rate_bps: dict[str, float] = field(default_factory=dict)
    endurance_floor_s: float = 1800.0
    initial_priority: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.initial_priority:
            self.initial_priority = dict(self.class_priority)
        self.validate()

    def validate(self) -> None:
        if self.class_priority and not any(v > 0 for v in self.class_priority.values()):
            raise ValueError("at least one class priority must be positive")
        if any(v < 0 for v in self.class_priority.values()):
            raise ValueError("class priorities must be >= 0")
        if self.endurance_floor_s < 0:
            raise ValueError("endurance_floor_s must be >= 0")

    def weight_for(self, sector: Optional[str], traffic_class: str) -> float:
        for key in (_scope_key(sector, traffic_class), _scope_key(None, traffic_class)):
            if key in self.class_priority:
                return self.class_priority[key]
        return 1.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "IntentWeights":
        raw = dict(raw)
        raw.setdefault("initial_priority", dict(raw.get("class_priority", {})))
        return cls(**raw)


@dataclass
class OperatorFeedback:
    """One multiplicative weight adjustment from the operator."""

    sector: Optional[str]
    traffic_class: str
    factor: float


def apply_hitl_calibration(
    weights: IntentWeights, feedback: OperatorFeedback
) -> IntentWeights:
    """Multiplicative weight update, clipped to [0.1x, 10x] of the initial."""
    if feedback.traffic_class not in TrafficClassConfig.KINDS:
        raise UnknownClassError(f"unknown traffic class {feedback.traffic_class!r}")
    key = _scope_key(feedback.sector, feedback.traffic_class)
    known_keys = set(weights.class_priority)
    if key not in known_keys and _scope_key(None, feedback.traffic_class) not in known_keys:
        raise UnknownClassError(f"no weight declared for scope {key!r}")
    if key not in known_keys:
        key = _scope_key(None, feedback.traffic_class)
    new_priority = dict(weights.class_priority)
    initial = weights.initial_priority.get(key, new_priority[key])
    lo, hi = initial * WEIGHT_CLIP_LOW, initial * WEIGHT_CLIP_HIGH
    new_priority[key] = min(max(new_priority[key] * feedback.factor, lo), hi)
    return IntentWeights(
        class_priority=new_priority,
        latency_budget_s=dict(weights.latency_budget_s),
        min_rate_bps=dict(weights.min_rate_bps),
        endurance_floor_s=weights.endurance_floor_s,
        initial_priority=dict(weights.initial_priority),
    )


class Scheduler:
    """Stateful wrapper: holds the per-user EMA the PF scheme needs.

    allocate() is otherwise a pure function of the world snapshot; two
    Schedulers fed the same snapshots and weights produce the same
    decisions.
    """

    def __init__(self, scheme: str, ema_horizon: int = EMA_HORIZON_SLOTS):
        if scheme not in SCHEMES and scheme not in _EXTERNAL_SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}")
        self.scheme = scheme
        self.ema_horizon = ema_horizon
        self.ema_bps: dict[str, float] = {}

    def allocate(self, world: WorldState, weights: IntentWeights) -> AllocationDecision:
        users = [u for u in world.users if u.serving_uav]
        ops = [u for u in world.uavs if u.operational]
        if not users or not ops:
            raise EmptyWorldError("no served users or no operational UAVs")
        if self.scheme in _EXTERNAL_SCHEMES:
            return _EXTERNAL_SCHEMES[self.scheme](world, weights)

        decision = AllocationDecision(slot=world.clock_slot)
        # one vectorized link-budget pass reused for every per-cell decision;
        # under full grid reuse every other UAV is assumed on-air on every
        # PRB, which is what a loaded system converges to
        noise_mw = 10.0 ** (
            noise_power_dbm(
                world.config.prb_bandwidth_hz, world.config.channel.noise_figure_db
            )
            / 10.0
        )
        rx_mw = 10.0 ** (world.rx_matrix_dbm() / 10.0)
        for i, uav in enumerate(world.uavs):
            if not uav.operational:
                rx_mw[i, :] = 0.0
        if world.config.prb_reuse == "full" and len(world.uavs) > 1:
            interference = rx_mw.sum(axis=0)[None, :] - rx_mw
        else:
            interference = np.zeros_like(rx_mw)
        sinr_lin = rx_mw / (interference + noise_mw)
        self._eff = np.log2(1.0 + sinr_lin)
        self._uidx = {u.id: j for j, u in enumerate(world.users)}
        for uav in ops:
            cell_users = sorted(
                (u for u in users if u.serving_uav == uav.id), key=lambda u: u.id
            )
            if not cell_users:
                continue
            prbs = world.allowed_prbs(uav.id)
            if self.scheme == "round_robin":
                shares = self._round_robin(world, cell_users, prbs)
            elif self.scheme == "max_sinr":
                shares = self._max_sinr(world, uav, cell_users, prbs)
            else:
                shares = self._intent_pf(world, uav, cell_users, prbs, weights)
            for user_id, user_prbs in shares.items():
                if user_prbs:
                    decision.assignments.append(Assignment(user_id, uav.id, user_prbs))

        self._update_ema(world, decision)
        return decision

    # ------------------------------------------------------------- schemes

    def _round_robin(self, world, cell_users, prbs) -> dict[str, list[int]]:
        n = len(cell_users)
        offset = world.clock_slot % n
        shares: dict[str, list[int]] = {u.id: [] for u in cell_users}
        for i, prb in enumerate(prbs):
            user = cell_users[(i + offset) % n]
            shares[user.id].append(prb)
        return shares

    def _max_sinr(self, world, uav, cell_users, prbs) -> dict[str, list[int]]:
        # flat per-link channel: the per-PRB argmax is the same user each time
        ui = world._uav_index[uav.id]
        snrs = {u.id: float(self._eff[ui, self._uidx[u.id]]) for u in cell_users}
        best = max(snrs.values())
        winner = min(uid for uid, s in snrs.items() if s == best)
        return {winner: list(prbs)}

    def _intent_pf(self, world, uav, cell_users, prbs, weights) -> dict[str, list[int]]:
        cfg = world.config
        prb_bw = cfg.prb_bandwidth_hz
        ui = world._uav_index[uav.id]
        est_rate = {
            u.id: prb_bw * float(self._eff[ui, self._uidx[u.id]]) for u in cell_users
        }
        shares: dict[str, list[int]] = {u.id: [] for u in cell_users}
        pool = list(prbs)

        def is_deadline_user(u) -> bool:
            g = cfg.user_groups[u.group_index]
            return g.kind == "sar_urllc" and g.deadline_s is not None

        deadline_users = [u for u in cell_users if is_deadline_user(u)]
        throughput_users = [u for u in cell_users if not is_deadline_user(u)]

        # deadline users pre-empt just enough PRBs to land inside budget,
        # bounded by the cap; least-served (lowest EMA) goes first so an
        # overloaded peer cannot monopolize the pre-emption budget
        cap = int(PREEMPTION_CAP * len(prbs))
        taken = 0
        for u in sorted(
            deadline_users, key=lambda u: (self.ema_bps.get(u.id, 0.0), u.id)
        ):
            g = cfg.user_groups[u.group_index]
            pending = u.queue_bits + g.packet_bits
            per_prb = est_rate[u.id]
            if per_prb <= 0:
                continue
            needed = math.ceil(pending / (DEADLINE_MARGIN * g.deadline_s) / per_prb)
            grant = min(needed, cap - taken, len(pool))
            if grant > 0:
                shares[u.id] = pool[:grant]
                pool = pool[grant:]
                taken += grant

        # remaining grid: proportional-fair by weight * rate / EMA, dealt as
        # a highest-averages apportionment (monotone in the weights).
        # Deadline users already hold what their budget needs; they only
        # rejoin when the cell serves nobody else.
        contenders = throughput_users or cell_users
        scores = {}
        useful_cap = {}
        dt = cfg.slot_duration_s
        for u in contenders:
            w = weights.weight_for(u.home_sector or u.sector, u.group)
            ema = max(self.ema_bps.get(u.id, 0.0), 1e3)
            scores[u.id] = w * est_rate[u.id] / ema
            # grants beyond the drainable backlog would idle-serve an empty
            # queue; truncate at demand (with headroom for this slot's burst)
            g = cfg.user_groups[u.group_index]
            drainable = u.queue_bits + 2 * int(g.packet_bits * g.packets_per_slot)
            per_prb_bits = est_rate[u.id] * dt
            useful_cap[u.id] = (
                len(pool)
                if per_prb_bits <= 0
                else max(1, math.ceil(drainable / per_prb_bits))
            )
        if not pool or all(s <= 0 for s in scores.values()):
            return shares
        grants = {uid: 0 for uid in scores}
        remaining = len(pool)
        # round 1: demand-truncated highest-averages draft (heap, ties to
        # the lowest id via the id in the key)
        heap = [
            (-scores[uid], uid, 0) for uid in sorted(scores) if scores[uid] > 0
        ]
        heapq.heapify(heap)
        while remaining > 0 and heap:
            neg_avg, uid, g = heapq.heappop(heap)
            if g != grants[uid]:
                continue  # stale entry
            if grants[uid] >= useful_cap[uid]:
                continue  # saturated: do not re-enter the draft
            grants[uid] = g + 1
            remaining -= 1
            heapq.heappush(heap, (-scores[uid] / (g + 2), uid, g + 1))
        # round 2: everyone saturated; spread the leftover by the same rule
        # uncapped so the grid stays fully assigned
        if remaining > 0:
            heap = [
                (-scores[uid] / (1 + grants[uid]), uid, grants[uid])
                for uid in sorted(scores)
                if scores[uid] > 0
            ]
            heapq.heapify(heap)
            while remaining > 0 and heap:
                neg_avg, uid, g = heapq.heappop(heap)
                if g != grants[uid]:
                    continue
                grants[uid] = g + 1
                remaining -= 1
                heapq.heappush(heap, (-scores[uid] / (g + 2), uid, g + 1))
        cursor = 0
        for uid in sorted(grants):
            take = grants[uid]
            if take > 0:
                shares[uid] = shares[uid] + pool[cursor : cursor + take]
                cursor += take
        return shares

    # ------------------------------------------------------------- helpers

    def _update_ema(self, world, decision: AllocationDecision) -> None:
        cfg = world.config
        prb_bw = cfg.prb_bandwidth_hz
        alloc_rate = {}
        for a in decision.assignments:
            ui = world._uav_index[a.uav_id]
            alloc_rate[a.user_id] = (
                len(a.prbs) * prb_bw * float(self._eff[ui, self._uidx[a.user_id]])
            )
        beta = 1.0 / self.ema_horizon
        for user in world.users:
            prev = self.ema_bps.get(user.id, 0.0)
            self.ema_bps[user.id] = (1 - beta) * prev + beta * alloc_rate.get(user.id, 0.0)


_EXTERNAL_SCHEMES: dict[str, Callable[[WorldState, IntentWeights], AllocationDecision]] = {}


def register_external_scheme(
    name: str, fn: Callable[[WorldState, IntentWeights], AllocationDecision]
) -> None:
    """Hook for plugging in externally driven policies (RL agents, LLMs)."""
    if name in SCHEMES or name in _EXTERNAL_SCHEMES:
        raise ValueError(f"scheme name {name!r} already taken")
    _EXTERNAL_SCHEMES[name] = fn


def allocate(
    world: WorldState,
    weights: IntentWeights,
    scheme: str,
    scheduler: Optional[Scheduler] = None,
) -> AllocationDecision:
    """One-shot allocation; pass a Scheduler to keep PF state across slots."""
    sched = scheduler if scheduler is not None else Scheduler(scheme)
    if sched.scheme != scheme:
        raise ValueError("scheduler was built for a different scheme")
    return sched.allocate(world, weights)


def endurance_guard_ok(world: WorldState, uav_id: str, weights: IntentWeights) -> bool:
    """True when the UAV can accept a new relay role under the endurance floor."""
    from .sim.energy import propulsion_power, remaining_endurance_s

    uav = world.uav(uav_id)
    draw = propulsion_power(0.0, world.config.energy)
    return remaining_endurance_s(uav.battery_j, draw) >= weights.endurance_floor_s
