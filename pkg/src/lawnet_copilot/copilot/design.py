"""Greenfield design: candidate UAV placements stress-tested in forks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..sim.world import WorldState, SimEvent
from ..sim.mobility import kmeans_placement
from ..allocator import IntentWeights, Scheduler, EmptyWorldError
from ..metrics import QosConstraint, compute_isr
from .intent import StructuredIntent
from .configgen import dry_run_script, validate_config_script

STRESS_HORIZON_SLOTS = 50


class NoFeasibleDesignError(RuntimeError):
    pass


@dataclass
class Blueprint:
    """Complete design proposal: placements, radio, weights, twin evidence."""

    uav_placements: list[dict]  # {uav_id, x, y, altitude_m, role}
    radio_config: list[dict]
    allocation_weights: IntentWeights
    validation_report: dict
    scheme: str = "intent_weighted_pf"

    def to_dict(self) -> dict:
        return {
            "uav_placements": self.uav_placements,
            "radio_config": self.radio_config,
            "allocation_weights": self.allocation_weights.to_dict(),
            "validation_report": self.validation_report,
            "scheme": self.scheme,
        }

    def as_config_script(self, name: str) -> dict:
        radio = []
        for p, r in zip(self.uav_placements, self.radio_config):
            block = {"uav_id": p["uav_id"], "altitude_m": p["altitude_m"]}
            block.update(r)
            radio.append(block)
        return {
            "name": name,
            "radio": radio,
            "qos_weights": dict(self.allocation_weights.class_priority),
            "relay_links": [],
            "allocation_weights": self.allocation_weights.to_dict(),
            "scheme": self.scheme,
        }


def _score_candidate(
    twin: WorldState,
    weights: IntentWeights,
    constraints: list[QosConstraint],
    scheme: str,
    horizon: int,
) -> float:
    sched = Scheduler(scheme)
    reports = []
    for _ in range(horizon):
        try:
            alloc = sched.allocate(twin, weights)
        except EmptyWorldError:
            from ..sim.world import AllocationDecision

            alloc = AllocationDecision(slot=twin.clock_slot)
        reports.append(twin.step(alloc))
    if not constraints:
        served = sum(u.served_bits for r in reports for u in r.users)
        return served / max(1, horizon)
    return compute_isr(reports, constraints, twin.config.slot_duration_s)


def design_network(
    intent: StructuredIntent,
    twin: WorldState,
    weights: IntentWeights,
    constraints: list[QosConstraint],
    n_restarts: int = 5,
    scheme: str = "intent_weighted_pf",
    horizon: int = STRESS_HORIZON_SLOTS,
) -> Blueprint:
    """Propose placements: k-means seed plus jittered restarts, each
    stress-tested against a UAV failure and ongoing user movement."""
    if intent.task_kind != "design":
        raise ValueError("intent is not a design task")
    if n_restarts < 1:
        raise NoFeasibleDesignError("no candidate restarts configured")

    cfg = twin.config
    xy = np.array([[u.position[0], u.position[1]] for u in twin.users])
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0xD5)))
    base = kmeans_placement(xy, cfg.n_uavs, cfg.area_side_m, rng)

    candidates = [base]
    for _ in range(n_restarts - 1):
        jitter = rng.normal(0, 30.0, size=base.shape)
        cand = np.clip(base + jitter, 0.0, cfg.area_side_m)
        candidates.append(cand)

    scored = []
    for ci, centers in enumerate(candidates):
        # nominal run and a failure stress run, averaged
        scores = []
        for stress in (False, True):
            fork = twin.fork(branch_seed=100 + ci * 2 + int(stress))
            order = np.lexsort((centers[:, 1], centers[:, 0]))
            for i, o in enumerate(order):
                fork.uavs[i].position = [
                    float(centers[o][0]),
                    float(centers[o][1]),
                    cfg.uav_altitude_m,
                ]
            fork.refresh_channel()
            fork.reattach_users()
            if stress and fork.uavs:
                victim = fork.uavs[0].id
                fork.inject_event(
                    SimEvent(
                        kind="uav_failure",
                        target=victim,
                        magnitude=0.0,
                        start_slot=fork.clock_slot,
                        end_slot=fork.clock_slot + horizon // 2,
                    )
                )
            scores.append(_score_candidate(fork, weights, constraints, scheme, horizon))
        scored.append((sum(scores) / len(scores), ci, centers))

    scored.sort(key=lambda t: (-t[0], t[1]))
    best_score, best_idx, best_centers = scored[0]
    if best_score <= 0.0 and constraints:
        raise NoFeasibleDesignError(
            "every candidate design violates the intent constraints"
        )

    order = np.lexsort((best_centers[:, 1], best_centers[:, 0]))
    placements = [
        {
            "uav_id": f"uav-{i}",
            "x": float(best_centers[o][0]),
            "y": float(best_centers[o][1]),
            "altitude_m": cfg.uav_altitude_m,
            "role": "access",
        }
        for i, o in enumerate(order)
    ]
    radio = [
        {"tx_power_dbm": cfg.uav_tx_power_dbm} for _ in placements
    ]
    report = {
        "candidates_evaluated": len(candidates),
        "stress_tests": ["nominal", "uav_failure"],
        "horizon_slots": horizon,
        "scores": [
            {"candidate": ci, "score": s} for s, ci, _ in sorted(scored, key=lambda t: t[1])
        ],
        "chosen_candidate": best_idx,
        "chosen_score": best_score,
        "fork_branch_seeds": [100 + best_idx * 2, 100 + best_idx * 2 + 1],
    }
    return Blueprint(
        uav_placements=placements,
        radio_config=radio,
        allocation_weights=weights,
        validation_report=report,
        scheme=scheme,
    )


def generate_config(
    blueprint: Blueprint, twin: WorldState, name: str = "blueprint-deploy"
) -> dict:
    """Schema-validated config script plus a recorded twin dry-run pass."""
    script = blueprint.as_config_script(name)
    validate_config_script(script, twin.config)
    record = dry_run_script(
        script,
        twin.fork(branch_seed=7),
        blueprint.allocation_weights,
        blueprint.scheme,
    )
    script["dry_run"] = record
    return script
