"""Closed-loop remediation: candidate actions raced on forked twins.

Three families are always considered: raising transmit power, rerouting
affected users to another UAV, and repositioning (altitude change). For an
atmospheric-attenuation diagnosis the altitude candidate is mandatory:
climbing above a bounded plume is the only action that removes the loss
instead of compensating it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from ..sim.world import WorldState, UavCommand, AllocationDecision
from ..allocator import IntentWeights, Scheduler, EmptyWorldError
from ..metrics import QosConstraint, compute_isr
from ..knowledge import KnowledgeDoc
from .diagnostics import Diagnosis
from .protocol import Plan, PlanStep, ToolCall

# one full LoS coherence interval, so a candidate evaluation spans at
# least one re-attachment boundary
EVAL_HORIZON_SLOTS = 100
ALTITUDE_STEP_M = 50.0
TX_POWER_STEP_DB = 3.0


class NoImprovingActionError(RuntimeError):
    pass


@dataclass
class CandidateAction:
    name: str
    commands: list[UavCommand]
    tool: str
    tool_args: dict
    score: float = 0.0
    served_bps: float = 0.0
    per_prb_bps: float = 0.0
    energy_j: float = 0.0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "tool": self.tool,
            "tool_args": self.tool_args,
            "score": self.score,
            "served_bps": self.served_bps,
            "per_prb_bps": self.per_prb_bps,
            "energy_j": self.energy_j,
        }


def _evaluate(
    world: WorldState,
    commands: list[UavCommand],
    weights: IntentWeights,
    constraints: list[QosConstraint],
    scheme: str,
    ema_bps: dict,
    branch_seed: int,
    horizon: int,
    watch_users: list[str],
) -> tuple[float, float, float, float]:
    """(intent score, served bps, per-PRB rate, energy) on a fresh fork.

    All three quality terms are measured on the watched users only.
    """
    twin = world.fork(branch_seed=branch_seed)
    sched = Scheduler(scheme)
    sched.ema_bps = dict(ema_bps)
    start_energy = sum(u.battery_j for u in twin.uavs)
    reports = []
    watched = set(watch_users)
    pending = list(commands)
    for _ in range(horizon):
        try:
            alloc = sched.allocate(twin, weights)
        except EmptyWorldError:
            alloc = AllocationDecision(slot=twin.clock_slot)
        if pending:
            alloc.uav_commands.extend(pending)
            pending = []
        reports.append(twin.step(alloc))
    energy = start_energy - sum(u.battery_j for u in twin.uavs)
    if constraints:
        score = compute_isr(reports, constraints, twin.config.slot_duration_s)
    else:
        score = 0.0
    dt = twin.config.slot_duration_s
    served_bits = sum(
        u.served_bits for r in reports for u in r.users if u.user_id in watched
    )
    served_bps = served_bits / (horizon * dt) if horizon else 0.0
    # per-PRB rate breaks served-bps ties when demand limits delivery
    samples = [
        u.rate_bps / u.n_prbs
        for r in reports
        for u in r.users
        if u.user_id in watched and u.n_prbs > 0
    ]
    per_prb = sum(samples) / len(samples) if samples else 0.0
    return score, served_bps, per_prb, energy


def enumerate_candidates(
    diagnosis: Diagnosis, world: WorldState
) -> tuple[list[CandidateAction], list[str]]:
    uav_id = diagnosis.affected_uav or (world.uavs[0].id if world.uavs else None)
    if uav_id is None:
        return [], []
    uav = world.uav(uav_id)
    affected_users = [
        u.id
        for u in world.users
        if u.serving_uav == uav_id
        and (diagnosis.affected_class is None or u.group == diagnosis.affected_class)
    ] or [u.id for u in world.users if u.serving_uav == uav_id]
    others = [v for v in world.uavs if v.id != uav_id and v.operational]
    candidates = [
        CandidateAction(
            name="raise_tx_power",
            commands=[
                UavCommand(uav_id, "tx_power_dbm", min(uav.tx_power_dbm + TX_POWER_STEP_DB, 40.0))
            ],
            tool="update_ran_parameters",
            tool_args={
                "gnodeb_id": uav_id,
                "params": {"tx_power_dbm": min(uav.tx_power_dbm + TX_POWER_STEP_DB, 40.0)},
            },
        )
    ]
    if others and affected_users:
        # the geometrically farthest healthy UAV carries the reroute
        fallback = max(
            others,
            key=lambda v: math.dist(v.position[:2], uav.position[:2]),
        )
        candidates.append(
            CandidateAction(
                name="reroute_users",
                commands=[UavCommand(fallback.id, "reattach", affected_users)],
                tool="update_ran_parameters",
                tool_args={
                    "gnodeb_id": fallback.id,
                    "params": {"reattach_users": affected_users},
                },
            )
        )
    candidates.append(
        CandidateAction(
            name="increase_altitude",
            commands=[UavCommand(uav_id, "altitude_delta", ALTITUDE_STEP_M)],
            tool="set_flight_altitude",
            tool_args={"uav_id": uav_id, "delta_m": ALTITUDE_STEP_M},
        )
    )
    return candidates, affected_users


def optimize(
    copilot,
    session,
    diagnosis: Diagnosis,
    plan_id: str,
    horizon: int = EVAL_HORIZON_SLOTS,
) -> Plan:
    """Race the candidate families on forks; propose the argmax as a plan."""
    if diagnosis.root_cause == "inconclusive":
        raise ValueError("optimization requires a definite diagnosis")
    runtime = copilot.runtime
    world = runtime.world
    weights = runtime.weights
    constraints = runtime.constraints
    scheme = runtime.scheme
    ema = runtime.scheduler.ema_bps

    candidates, watch_users = enumerate_candidates(diagnosis, world)
    if diagnosis.root_cause == "atmospheric_attenuation":
        assert any(c.name == "increase_altitude" for c in candidates)

    # common random numbers: every candidate (and the baseline) runs on the
    # same fork branch, so score differences come from the action alone
    base_score, base_served, base_prb, _ = _evaluate(
        world, [], weights, constraints, scheme, ema,
        branch_seed=200, horizon=horizon, watch_users=watch_users,
    )
    for cand in candidates:
        cand.score, cand.served_bps, cand.per_prb_bps, cand.energy_j = _evaluate(
            world,
            cand.commands,
            weights,
            constraints,
            scheme,
            ema,
            branch_seed=200,
            horizon=horizon,
            watch_users=watch_users,
        )

    # lexicographic improvement with noise-tolerant quantization: a couple
    # of flaky slots out of the horizon must not outrank the physical
    # recovery signal. Intent score is compared in 0.1 bins, served bits to
    # two significant figures, per-PRB rate raw.
    def _key(score: float, served: float, per_prb: float):
        return (
            math.floor(score * 10.0 + 1e-9),
            float(f"{served:.2g}"),
            per_prb,
        )

    base_key = _key(base_score, base_served, base_prb * 1.05)
    improving = [
        c
        for c in candidates
        if _key(c.score, c.served_bps, c.per_prb_bps) > base_key
    ]
    if not improving:
        raise NoImprovingActionError(
            f"no candidate beats the no-action baseline (score {base_score:.4f}, "
            f"{base_served/1e6:.1f} Mbps served on affected links)"
        )
    best_key = max(
        _key(c.score, c.served_bps, c.per_prb_bps) for c in improving
    )
    best = min(
        (
            c
            for c in improving
            if _key(c.score, c.served_bps, c.per_prb_bps) == best_key
        ),
        key=lambda c: (c.energy_j, c.name),
    )

    eval_doc = KnowledgeDoc(
        doc_id=f"whatif-{plan_id}",
        kind="telemetry",
        title=f"what-if evaluation for plan {plan_id}",
        body=json.dumps(
            {
                "baseline_score": base_score,
                "baseline_served_bps": base_served,
                "baseline_per_prb_bps": base_prb,
                "horizon_slots": horizon,
                "candidates": [c.to_dict() for c in candidates],
                "selected": best.name,
            },
            sort_keys=True,
        ),
        tags=["whatif", "optimization", diagnosis.root_cause],
        slot_stamp=runtime.clock_slot,
    )
    runtime.kb.ingest(eval_doc)

    evidence = list(diagnosis.evidence) + [eval_doc.doc_id]
    reasoner = copilot.reasoner
    steps = [
        PlanStep(
            stage_label="candidate_evaluation",
            rationale=reasoner.rationale(
                "candidate_evaluation",
                {
                    "root_cause": diagnosis.root_cause,
                    "baseline": [base_score, base_served, base_prb],
                    "candidates": {
                        c.name: [c.score, c.served_bps, c.per_prb_bps]
                        for c in candidates
                    },
                },
            ),
            evidence=evidence,
        ),
        PlanStep(
            stage_label="operator_checkpoint",
            rationale=(
                f"Apply {best.name} (score {best.score:.3f} vs baseline "
                f"{base_score:.3f}, {best.served_bps/1e6:.1f} vs "
                f"{base_served/1e6:.1f} Mbps served)? "
                "Lower-energy ties were preferred."
            ),
            evidence=evidence,
        ),
        PlanStep(
            stage_label="apply_remediation",
            rationale=reasoner.rationale("apply_remediation", {"action": best.name}),
            evidence=evidence,
            side_effecting=True,
            tool_call=ToolCall(
                tool=best.tool,
                args=best.tool_args,
                session_id=session.session_id,
                plan_id=plan_id,
                call_id=f"{plan_id}-remediate",
            ),
        ),
        PlanStep(
            stage_label="verification",
            rationale="Confirm recovery of the affected links after actuation.",
            evidence=evidence,
            tool_call=ToolCall(
                tool="get_kpi_report",
                args={"slice_id": "all", "time_window": 100},
                session_id=session.session_id,
                plan_id=plan_id,
                call_id=f"{plan_id}-verify",
            ),
        ),
    ]
    return Plan(plan_id=plan_id, task_kind="optimize", steps=steps, checkpoints=[1])
