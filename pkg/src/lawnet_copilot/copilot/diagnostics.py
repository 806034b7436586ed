"""Four-stage root-cause analysis over live telemetry and event logs.

Stages: data gathering (KPIs vs SLA), radio-access analysis (SINR and
co-channel interference), backhaul analysis (relay utilization/latency),
then a validated correlation step that names one root cause or declares
the symptom unconfirmed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .intent import _CLASS_CUES
from .protocol import DialogueSession, ToolCall

SLA_LATENCY_S = 1e-3
SLA_RELIABILITY = 1e-9  # tolerated miss fraction

INTERFERENCE_SINR_DB = 3.0
INTERFERENCE_FRACTION = 0.2
BACKHAUL_UTIL_LIMIT = 0.9
BACKHAUL_LATENCY_BUDGET_SHARE = 0.5

ROOT_CAUSES = (
    "backhaul_congestion",
    "prb_interference",
    "atmospheric_attenuation",
    "node_failure",
    "inconclusive",
)

STAGES = ("data_gathering", "ran_analysis", "backhaul_core", "validation")


class InsufficientTelemetryError(RuntimeError):
    pass


@dataclass
class Diagnosis:
    symptom: str
    findings: dict[str, list[str]] = field(default_factory=dict)
    root_cause: str = "inconclusive"
    evidence: list[str] = field(default_factory=list)
    affected_uav: Optional[str] = None
    affected_class: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "symptom": self.symptom,
            "findings": self.findings,
            "root_cause": self.root_cause,
            "evidence": self.evidence,
            "affected_uav": self.affected_uav,
            "affected_class": self.affected_class,
        }


def _symptom_scope(symptom: str, known_uavs: list[str]) -> tuple[Optional[str], Optional[str]]:
    low = symptom.lower()
    uav = None
    m = re.search(r"\buav[-_ ]?(\d+)\b", low)
    if m:
        cand = f"uav-{m.group(1)}"
        if cand in known_uavs:
            uav = cand
    cls = None
    for pattern, name in _CLASS_CUES:
        if re.search(pattern, low):
            cls = name
            break
    if cls is None and "urllc" in low:
        cls = "sar_urllc"
    return uav, cls


def run_diagnosis(
    copilot,
    session: DialogueSession,
    symptom: str,
    window: int = 100,
) -> Diagnosis:
    """Execute the staged analysis with read-only tools; fully audited."""
    runtime = copilot.runtime
    if len(runtime.trace) < 1:
        raise InsufficientTelemetryError("no telemetry recorded for the symptom window")
    window = min(window, len(runtime.trace))

    telemetry_doc = runtime.ingest_snapshot(window)
    uav_ids = [u.id for u in runtime.world.uavs]
    affected_uav, affected_class = _symptom_scope(symptom, uav_ids)

    diag = Diagnosis(symptom=symptom)
    diag.affected_class = affected_class
    if telemetry_doc:
        diag.evidence.append(telemetry_doc)

    def call(tool: str, args: dict, label: str):
        return copilot.registry.invoke(
            session,
            ToolCall(tool=tool, args=args, session_id=session.session_id, call_id=label),
        )

    # -- stage 1: data gathering -----------------------------------------
    slice_id = affected_class or "all"
    kpi = call("get_kpi_report", {"slice_id": "all", "time_window": window}, "diag-kpi")
    if kpi.status != "ok":
        raise InsufficientTelemetryError(kpi.error or "KPI report unavailable")
    diag.evidence.append(kpi.result_id)
    sla_docs = [r.doc_id for r in runtime.kb.retrieve("latency reliability sla budget", k=1, kind_filter="policy")]
    diag.evidence.extend(sla_docs)
    stage1: list[str] = []
    classes = kpi.payload["classes"]
    focus = classes.get(slice_id) or {}
    for cls, data in sorted(classes.items()):
        if affected_class and cls != affected_class:
            continue
        if data["mean_latency_s"] > SLA_LATENCY_S and cls == "sar_urllc":
            stage1.append(
                f"{cls} mean latency {data['mean_latency_s']*1e3:.3f} ms exceeds the 1 ms budget"
            )
        misses = data["deadline_misses"]
        total = misses + data["deadline_hits"]
        if total and misses / total > SLA_RELIABILITY:
            stage1.append(f"{cls} missed {misses} of {total} deadlines in the window")
        if data["offered_bps"] > 0 and data["mean_throughput_bps"] < 0.9 * data["offered_bps"]:
            stage1.append(
                f"{cls} serving {data['mean_throughput_bps']/1e6:.1f} of "
                f"{data['offered_bps']/1e6:.1f} Mbps offered"
            )
    # active disturbances are data too: list them up front
    for ev in runtime.world.active_events():
        if affected_uav and ev.target.split(":")[0] not in ("", affected_uav) and ev.kind != "user_surge":
            continue
        stage1.append(f"active event {ev.event_id}: {ev.kind} on {ev.target}")
    diag.findings["data_gathering"] = stage1

    # -- stage 2: radio access -------------------------------------------
    stage2: list[str] = []
    interference_doc = [
        r.doc_id
        for r in runtime.kb.retrieve("interference sinr threshold prb", k=1, kind_filter="documentation")
    ]
    diag.evidence.extend(interference_doc)
    interference_flag = False
    for cls, data in sorted(classes.items()):
        if affected_class and cls != affected_class:
            continue
        if data["mean_sinr_db"] is not None and data["low_sinr_fraction"] >= INTERFERENCE_FRACTION:
            interference_flag = True
            stage2.append(
                f"{cls} below {INTERFERENCE_SINR_DB:.0f} dB SINR on "
                f"{data['low_sinr_fraction']*100:.0f}% of allocated resources"
            )
    probe_target = affected_uav or uav_ids[0]
    spectrum = call("run_spectrum_analysis", {"location": probe_target}, "diag-spectrum")
    attenuation_events = []
    if spectrum.status == "ok":
        diag.evidence.append(spectrum.result_id)
        attenuation_events = [
            e
            for e in spectrum.payload["attenuation_events"]
            if affected_uav is None or e["target"].split(":")[0] == affected_uav
        ]
        if attenuation_events:
            worst = max(e["magnitude"] for e in attenuation_events)
            stage2.append(
                f"excess attenuation of {worst:.0f} dB active on "
                f"{', '.join(sorted({e['target'] for e in attenuation_events}))}"
            )
    logs = call("fetch_event_logs", {"node_id": probe_target}, "diag-logs")
    failure_events = []
    if logs.status == "ok":
        diag.evidence.append(logs.result_id)
        failure_events = [
            e
            for e in logs.payload["events"]
            if e["kind"] == "uav_failure"
            and e["start_slot"] <= runtime.clock_slot <= e["end_slot"]
        ]
        if failure_events:
            stage2.append(f"{probe_target} is down (failure event active)")
    diag.findings["ran_analysis"] = stage2

    # -- stage 3: backhaul and core ----------------------------------------
    stage3: list[str] = []
    backhaul_doc = [
        r.doc_id
        for r in runtime.kb.retrieve("backhaul relay congestion utilization", k=1, kind_filter="documentation")
    ]
    diag.evidence.extend(backhaul_doc)
    budget = SLA_LATENCY_S if (affected_class in (None, "sar_urllc")) else 0.05
    backhaul_flag = False
    for uav_id, info in sorted(kpi.payload["uavs"].items()):
        if affected_uav and uav_id != affected_uav:
            continue
        if info["utilization"] > BACKHAUL_UTIL_LIMIT:
            backhaul_flag = True
            stage3.append(f"{uav_id} relay utilization {info['utilization']*100:.0f}%")
        elif info["latency_s"] > BACKHAUL_LATENCY_BUDGET_SHARE * budget:
            backhaul_flag = True
            stage3.append(
                f"{uav_id} backhaul latency {info['latency_s']*1e3:.2f} ms exceeds "
                f"half the {budget*1e3:.0f} ms class budget"
            )
    diag.findings["backhaul_core"] = stage3

    # -- stage 4: validation and conclusion ------------------------------
    # checkpoint: the staged findings are presented before the conclusion
    session.audit(
        "diagnosis_checkpoint",
        {"symptom": symptom, "findings": diag.findings},
        runtime.clock_slot,
    )
    stage4: list[str] = []
    radio_clean = not interference_flag and not attenuation_events
    if not stage1:
        # nothing in the data supports the symptom: do not invent a cause
        diag.findings["validation"] = []
        diag.root_cause = "inconclusive"
        if diag.affected_uav is None:
            diag.affected_uav = affected_uav
        session.audit("diagnosis", diag.to_dict(), runtime.clock_slot)
        return diag
    if failure_events:
        diag.root_cause = "node_failure"
        stage4.append(f"confirmed node failure on {probe_target}")
    elif attenuation_events:
        diag.root_cause = "atmospheric_attenuation"
        dust_docs = [
            r.doc_id
            for r in runtime.kb.retrieve("mmwave attenuation particulates smoke", k=1)
        ]
        diag.evidence.extend(dust_docs)
        diag.affected_uav = affected_uav or attenuation_events[0]["target"].split(":")[0]
        stage4.append(
            "loss increase with unchanged geometry matches particulate absorption"
        )
    elif interference_flag:
        diag.root_cause = "prb_interference"
        stage4.append("co-channel interference above the screening threshold")
    elif backhaul_flag and radio_clean and stage1:
        diag.root_cause = "backhaul_congestion"
        stage4.append("radio is healthy while the transport segment is saturated")
    else:
        diag.root_cause = "inconclusive"
        if not stage1:
            stage4 = []  # all KPIs inside SLA: nothing to confirm
        else:
            stage4.append("no stage isolates a single cause")
    diag.findings["validation"] = stage4
    if diag.affected_uav is None:
        diag.affected_uav = affected_uav

    # a definite verdict must be backed by findings in every stage
    if diag.root_cause != "inconclusive":
        for stage in STAGES:
            if not diag.findings.get(stage):
                diag.findings[stage] = [f"no anomaly beyond the {diag.root_cause} signature"]

    session.audit("diagnosis", diag.to_dict(), runtime.clock_slot)
    return diag
