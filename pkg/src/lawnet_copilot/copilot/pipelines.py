"""Intent-to-weights translation and the allocate-task plan builder."""

from __future__ import annotations

from typing import Optional

from ..allocator import IntentWeights
from ..metrics import QosConstraint
from .intent import StructuredIntent
from .protocol import Plan, PlanStep, ToolCall

# priority bumps applied per objective; bare classes keep weight 1.0
PRIORITY_PRIMARY = 8.0
PRIORITY_SECONDARY = 5.0

DEFAULT_LATENCY_BUDGETS = {"sar_urllc": 1e-3, "medical_video": 0.05, "civilian_bursty": 0.5}


def derive_weights(
    intent: StructuredIntent, base: Optional[IntentWeights] = None
) -> IntentWeights:
    """Map parsed objectives/constraints onto scheduler weights.

    Latency objectives rank highest (deadline traffic), throughput next.
    Explicit bounds override any base budgets; endurance bounds move the
    fleet floor.
    """
    priority = dict(base.class_priority) if base else {}
    budgets = dict(base.latency_budget_s) if base else {}
    floors = dict(base.min_rate_bps) if base else {}
    endurance = base.endurance_floor_s if base else 1800.0

    for obj in intent.objectives:
        if obj.traffic_class is None:
            continue
        key = f"{obj.sector or '*'}/{obj.traffic_class}"
        bump = PRIORITY_PRIMARY if obj.metric == "latency" else PRIORITY_SECONDARY
        priority[key] = max(priority.get(key, 0.0), bump)
        if obj.metric == "latency" and obj.traffic_class not in budgets:
            budgets[obj.traffic_class] = DEFAULT_LATENCY_BUDGETS.get(
                obj.traffic_class, 1e-3
            )

    for c in intent.constraints:
        if c.metric == "endurance":
            endurance = c.bound
        elif c.metric == "latency" and c.traffic_class:
            budgets[c.traffic_class] = c.bound
        elif c.metric == "throughput" and c.traffic_class:
            floors[c.traffic_class] = c.bound

    if not priority:
        priority["*/sar_urllc"] = PRIORITY_PRIMARY  # safe default: protect deadline class

    return IntentWeights(
        class_priority=priority,
        latency_budget_s=budgets,
        min_rate_bps=floors,
        endurance_floor_s=endurance,
    )


def intent_constraints(
    intent: StructuredIntent, weights: IntentWeights
) -> list[QosConstraint]:
    """The per-slot QoS checks the intent satisfaction rate is scored on."""
    out: list[QosConstraint] = []
    seen = set()
    for c in intent.constraints:
        if c.metric == "endurance":
            out.append(QosConstraint("endurance", c.bound, "min"))
            seen.add(("endurance", None))
        elif c.metric == "latency":
            out.append(
                QosConstraint("latency", c.bound, "max", c.sector, c.traffic_class)
            )
            seen.add(("latency", c.traffic_class))
        elif c.metric == "throughput":
            out.append(
                QosConstraint("throughput", c.bound, "min", c.sector, c.traffic_class)
            )
            seen.add(("throughput", c.traffic_class))
        elif c.metric == "reliability":
            out.append(
                QosConstraint("reliability", c.bound, "min", c.sector, c.traffic_class)
            )
    for obj in intent.objectives:
        if obj.traffic_class is None:
            continue
        if obj.metric == "latency" and ("latency", obj.traffic_class) not in seen:
            budget = weights.latency_budget_s.get(obj.traffic_class)
            if budget:
                out.append(
                    QosConstraint("latency", budget, "max", obj.sector, obj.traffic_class)
                )
        if obj.metric == "throughput" and ("throughput", obj.traffic_class) not in seen:
            floor = weights.min_rate_bps.get(obj.traffic_class)
            if floor:
                out.append(
                    QosConstraint("throughput", floor, "min", obj.sector, obj.traffic_class)
                )
    return out


def build_allocate_plan(
    plan_id: str,
    session_id: str,
    intent: StructuredIntent,
    weights: IntentWeights,
    scheme: str,
    evidence_docs: list[str],
    kpi_result_id: Optional[str],
    reasoner,
) -> Plan:
    """Weight derivation -> checkpoint -> policy deployment -> verification."""
    gather_evidence = list(evidence_docs)
    if kpi_result_id:
        gather_evidence.append(kpi_result_id)
    steps = [
        PlanStep(
            stage_label="context_gathering",
            rationale=reasoner.rationale(
                "context_gathering",
                {"query": intent.raw_text, "docs": evidence_docs},
            ),
            evidence=gather_evidence,
        ),
        PlanStep(
            stage_label="weight_derivation",
            rationale=reasoner.rationale(
                "weight_derivation",
                {
                    "objectives": [o.to_dict() for o in intent.objectives],
                    "priorities": weights.class_priority,
                    "endurance_floor_s": weights.endurance_floor_s,
                },
            ),
            evidence=gather_evidence,
        ),
        PlanStep(
            stage_label="operator_checkpoint",
            rationale="Review derived weights and scheme before deployment.",
            evidence=gather_evidence,
        ),
        PlanStep(
            stage_label="apply_allocation_policy",
            rationale=reasoner.rationale(
                "apply_allocation_policy", {"scheme": scheme}
            ),
            evidence=gather_evidence,
            side_effecting=True,
            tool_call=ToolCall(
                tool="deploy_network_slice",
                args={
                    "config_json": {
                        "name": f"intent-weights-{plan_id}",
                        "allocation_weights": weights.to_dict(),
                        "scheme": scheme,
                    }
                },
                session_id=session_id,
                plan_id=plan_id,
                call_id=f"{plan_id}-apply",
            ),
        ),
        PlanStep(
            stage_label="verification",
            rationale="Confirm post-deployment KPIs against the intent bounds.",
            evidence=gather_evidence,
            tool_call=ToolCall(
                tool="get_kpi_report",
                args={"slice_id": "all", "time_window": 100},
                session_id=session_id,
                plan_id=plan_id,
                call_id=f"{plan_id}-verify",
            ),
        ),
    ]
    return Plan(plan_id=plan_id, task_kind="allocate", steps=steps, checkpoints=[2])
