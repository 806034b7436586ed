"""Batch experiment driver, scripted operator, trace/CSV export, replay.

A run is (scenario, scheme, seed) -> MetricsResult plus a newline-delimited
SlotReport trace. The copilot scheme drives a full HITL dialogue from a
scripted operator file before (and during) the slot loop; the deterministic
schemes skip the dialogue and use the scenario's weights directly.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .sim.scenario import Scenario, load_scenario, ScenarioInvalidError
from .sim.world import SlotReport
from .allocator import IntentWeights, SCHEMES
from .metrics import MetricsResult, QosConstraint, metrics_for_trace
from .runtime import NetworkRuntime
from .copilot.engine import Copilot, ExecutionReport
from .copilot.protocol import ProtocolState
from .copilot.pipelines import derive_weights, intent_constraints
from .copilot.intent import parse_intent, AmbiguityReport, ParserContext

RUN_SCHEMES = SCHEMES + ("copilot",)


@dataclass
class ScriptedOperator:
    """Pre-recorded operator behaviour for headless end-to-end runs."""

    answers: list[str] = field(default_factory=list)
    verdicts: list[str] = field(default_factory=list)
    modifications: list[str] = field(default_factory=list)
    _answer_i: int = 0
    _verdict_i: int = 0
    _mod_i: int = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedOperator":
        raw = json.loads(Path(path).read_text())
        return cls(
            answers=list(raw.get("answers", [])),
            verdicts=list(raw.get("verdicts", [])),
            modifications=list(raw.get("modifications", [])),
        )

    @classmethod
    def approve_all(cls) -> "ScriptedOperator":
        return cls()

    def next_answer(self, options: list[str]) -> str:
        if self._answer_i < len(self.answers):
            ans = self.answers[self._answer_i]
            self._answer_i += 1
            return ans
        return options[0]

    def next_verdict(self) -> str:
        if self._verdict_i < len(self.verdicts):
            v = self.verdicts[self._verdict_i]
            self._verdict_i += 1
            return v
        return "approve"

    def next_modification(self) -> Optional[str]:
        if self._mod_i < len(self.modifications):
            m = self.modifications[self._mod_i]
            self._mod_i += 1
            return m
        return None


def scenario_constraints(scenario: Scenario) -> list[QosConstraint]:
    """Constraints implied by the scenario's intent text plus its weights."""
    base = (
        IntentWeights.from_dict(scenario.weights) if scenario.weights else IntentWeights()
    )
    if not scenario.intent_text:
        return []
    ctx = ParserContext(
        sectors=[s.name for s in scenario.config.sectors],
        classes=sorted({g.kind for g in scenario.config.user_groups}),
    )
    parsed = parse_intent(scenario.intent_text, ctx)
    if isinstance(parsed, AmbiguityReport):
        raise ScenarioInvalidError(
            "scenario intent_text is ambiguous; resolve it in the scenario file"
        )
    weights = derive_weights(parsed, base)
    return intent_constraints(parsed, weights)


def drive_copilot_dialogue(
    copilot: Copilot, operator: ScriptedOperator, intent_text: str
) -> tuple[ExecutionReport, "DialogueSession"]:
    """intent -> clarifications -> plan -> verdicts -> execution."""
    from .copilot.intent import ClarifyingQuestion

    session = copilot.open_session()
    outcome = copilot.submit_intent(session, intent_text)
    while isinstance(outcome, ClarifyingQuestion):
        outcome = copilot.answer_elicitation(
            session, operator.next_answer(outcome.options)
        )
    plan = copilot.propose_plan(session)
    report = None
    while True:
        verdict = operator.next_verdict()
        if verdict == "modify":
            mod = operator.next_modification()
            result = copilot.decide(session, "modify", mod)
            if isinstance(result, ClarifyingQuestion):
                ans = operator.next_answer(result.options)
                copilot.answer_elicitation(session, ans)
                copilot.propose_plan(session)
            continue
        copilot.decide(session, verdict)
        if verdict == "reject":
            return ExecutionReport("none", "rejected", 0, 0, 0), session
        report = copilot.execute(
            session, checkpoint_cb=lambda s, p, i: operator.next_verdict()
        )
        if report.status != "paused":
            break
    return report, session


def run_single(
    scenario: Scenario,
    scheme: str,
    seed: int,
    operator: Optional[ScriptedOperator] = None,
    n_slots: Optional[int] = None,
) -> tuple[MetricsResult, list[SlotReport], Optional[Copilot]]:
    """One deterministic run; returns metrics, raw trace, engine (if used)."""
    if scheme not in RUN_SCHEMES:
        raise ScenarioInvalidError(f"unknown scheme {scheme!r}")
    slots = n_slots if n_slots is not None else scenario.n_slots
    constraints = scenario_constraints(scenario)
    copilot = None

    if scheme == "copilot":
        runtime = NetworkRuntime(scenario, seed=seed)
        runtime.scheme = "intent_weighted_pf"
        from .allocator import Scheduler

        runtime.scheduler = Scheduler("intent_weighted_pf")
        copilot = Copilot(runtime)
        op = operator or ScriptedOperator.approve_all()
        if scenario.intent_text:
            drive_copilot_dialogue(copilot, op, scenario.intent_text)
            session = copilot.sessions[sorted(copilot.sessions)[0]]
            copilot.apply_intent_to_runtime(session)
        runtime.advance_slots(slots)
        constraints = runtime.constraints or constraints
    else:
        runtime = NetworkRuntime(scenario, seed=seed, load_corpus=False, snapshot_every=0)
        runtime.scheme = scheme
        from .allocator import Scheduler

        runtime.scheduler = Scheduler(scheme)
        base = (
            IntentWeights.from_dict(scenario.weights)
            if scenario.weights
            else IntentWeights()
        )
        if scenario.intent_text:
            ctx = ParserContext(
                sectors=[s.name for s in scenario.config.sectors],
                classes=sorted({g.kind for g in scenario.config.user_groups}),
            )
            parsed = parse_intent(scenario.intent_text, ctx)
            if not isinstance(parsed, AmbiguityReport):
                base = derive_weights(parsed, base)
        runtime.weights = base
        runtime.advance_slots(slots)

    budgets = dict(runtime.weights.latency_budget_s)
    result = metrics_for_trace(
        runtime.trace,
        constraints,
        scheme,
        seed,
        scenario.config.slot_duration_s,
        budgets,
    )
    return result, runtime.trace, copilot


def run_experiment(
    scenario_path: str | Path | Scenario,
    schemes: list[str],
    seeds: list[int],
    out_dir: Optional[str | Path] = None,
    operator: Optional[ScriptedOperator] = None,
    n_slots: Optional[int] = None,
) -> list[MetricsResult]:
    """Full scheme x seed grid; optionally exports traces, CSVs and audits."""
    scenario = (
        scenario_path
        if isinstance(scenario_path, Scenario)
        else load_scenario(scenario_path)
    )
    for s in schemes:
        if s not in RUN_SCHEMES:
            raise ScenarioInvalidError(f"unknown scheme {s!r}")
    out = Path(out_dir) if out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)

    results: list[MetricsResult] = []
    for scheme in schemes:
        for seed in seeds:
            op = operator or ScriptedOperator.approve_all()
            result, trace, copilot = run_single(scenario, scheme, seed, op, n_slots)
            results.append(result)
            if out:
                write_trace(out / f"trace_{scheme}_{seed}.ndjson", trace)
                if copilot is not None:
                    audit_path = out / f"audit_{scheme}_{seed}.json"
                    write_audit_bundle(audit_path, scenario, seed, copilot)
    if out:
        write_metrics_csv(out / "metrics.csv", results)
        write_plot_csv(out / "plot_data.csv", scenario, schemes, seeds, results)
    return results


# ------------------------------------------------------------------ exports


def write_trace(path: Path, trace: list[SlotReport]) -> None:
    with open(path, "w") as fh:
        for report in trace:
            fh.write(json.dumps(report.to_dict(), sort_keys=True) + "\n")


def read_trace(path: str | Path) -> list[SlotReport]:
    out = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                out.append(SlotReport.from_dict(json.loads(line)))
    return out


def metrics_csv_text(results: list[MetricsResult]) -> str:
    rows = [r.to_row() for r in results]
    cols: list[str] = []
    for row in rows:
        for key in row:
            if key not in cols:
                cols.append(key)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        formatted = {
            k: (f"{v:.9g}" if isinstance(v, float) else v) for k, v in row.items()
        }
        writer.writerow(formatted)
    return buf.getvalue()


def write_metrics_csv(path: Path, results: list[MetricsResult]) -> None:
    Path(path).write_text(metrics_csv_text(results))


def write_plot_csv(
    path: Path,
    scenario: Scenario,
    schemes: list[str],
    seeds: list[int],
    results: list[MetricsResult],
) -> None:
    """Long-format per-row metric values, one (scheme, seed, metric) a line."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["scheme", "seed", "metric", "scope", "value"])
    for r in results:
        writer.writerow([r.scheme, r.seed, "isr", "all", f"{r.isr:.9g}"])
        writer.writerow(
            [r.scheme, r.seed, "ee_mbit_per_joule", "all", f"{r.ee_mbit_per_joule:.9g}"]
        )
        for cls, (mean, p95, viol) in sorted(r.latency.items()):
            writer.writerow([r.scheme, r.seed, "latency_mean_s", cls, f"{mean:.9g}"])
            writer.writerow([r.scheme, r.seed, "latency_p95_s", cls, f"{p95:.9g}"])
            writer.writerow([r.scheme, r.seed, "latency_violation", cls, f"{viol:.9g}"])
    Path(path).write_text(buf.getvalue())


# ------------------------------------------------------------------- replay


def write_audit_bundle(
    path: Path, scenario: Scenario, seed: int, copilot: Copilot
) -> None:
    sessions = {
        sid: s.to_dict() for sid, s in sorted(copilot.sessions.items())
    }
    bundle = {
        "scenario": scenario.to_dict(),
        "seed": seed,
        "sessions": sessions,
    }
    Path(path).write_text(json.dumps(bundle, indent=2, sort_keys=True))


def replay_audit(path: str | Path) -> dict:
    """Re-drive the audited operator actions on a fresh twin and compare.

    Returns {"match": bool, "details": ...}; the replayed run must produce
    identical execution reports and verdict sequences.
    """
    bundle = json.loads(Path(path).read_text())
    scenario = load_scenario(bundle["scenario"])
    seed = bundle["seed"]

    runtime = NetworkRuntime(scenario, seed=seed)
    runtime.scheme = "intent_weighted_pf"
    from .allocator import Scheduler

    runtime.scheduler = Scheduler("intent_weighted_pf")
    copilot = Copilot(runtime)

    replayed_reports: list[dict] = []
    original_reports: list[dict] = []
    for sid, sess in sorted(bundle["sessions"].items()):
        entries = sess["audit_log"]
        session = copilot.open_session()
        checkpoint_verdicts = [
            e["payload"]["verdict"] for e in entries if e["kind"] == "checkpoint_verdict"
        ]
        cv_iter = iter(checkpoint_verdicts)

        def replay_checkpoint(_s, _p, _i):
            return next(cv_iter, "approve")

        for entry in entries:
            # advance the twin to the slot the action was recorded at
            while runtime.clock_slot < entry["slot_stamp"]:
                runtime.advance_slot()
            kind, payload = entry["kind"], entry["payload"]
            if kind == "intent_submitted":
                copilot.submit_intent(session, payload["text"])
            elif kind == "elicitation_answered":
                copilot.answer_elicitation(session, payload["choice"])
            elif kind == "verdict":
                if session.current_plan is None and payload["verdict"] != "modify":
                    copilot.propose_plan(session)
                copilot.decide(session, payload["verdict"], payload.get("text"))
            elif kind == "execution_started":
                # resumed executions re-audit this kind; only a session in
                # APPROVED actually has something left to run
                if session.state == ProtocolState.APPROVED:
                    report = copilot.execute(session, checkpoint_cb=replay_checkpoint)
                    replayed_reports.append(report.to_dict())
            elif kind == "event_injected":
                from .sim.world import SimEvent

                ev = {
                    k: v
                    for k, v in payload.items()
                    if k
                    in ("kind", "target", "magnitude", "start_slot", "end_slot", "ceiling_m")
                }
                runtime.inject_event(SimEvent(**ev))
            elif kind == "execution_report":
                original_reports.append(payload)
    match = _reports_equal(original_reports, replayed_reports)
    return {
        "match": match,
        "original_reports": original_reports,
        "replayed_reports": replayed_reports,
    }


def _reports_equal(a: list[dict], b: list[dict]) -> bool:
    def norm(reports):
        return [
            {
                "plan_id": r.get("plan_id"),
                "status": r.get("status"),
                "started_slot": r.get("started_slot"),
                "finished_slot": r.get("finished_slot"),
                "steps_run": r.get("steps_run"),
            }
            for r in reports
        ]

    return norm(a) == norm(b)


# ------------------------------------------------------------- closed loop


def run_closed_loop_demo(
    scenario: Scenario,
    seed: int = 0,
    baseline_slots: int = 300,
    smoke_db: float = 15.0,
    smoke_ceiling_m: float = 120.0,
    settle_slots: int = 100,
    recovery_budget_slots: int = 200,
    out_dir: Optional[str | Path] = None,
) -> dict:
    """Smoke event end to end: degrade, diagnose, approve a fix, recover.

    Injects an excess-attenuation event on the UAV carrying the most video
    users, runs the diagnose/optimize dialogue with an approving operator,
    and reports the affected users' delivered throughput before the event
    and over the trailing window after the fix.
    """
    from .sim.world import SimEvent

    runtime = NetworkRuntime(scenario, seed=seed)
    runtime.scheme = "intent_weighted_pf"
    from .allocator import Scheduler

    runtime.scheduler = Scheduler("intent_weighted_pf")
    copilot = Copilot(runtime)
    operator = ScriptedOperator.approve_all()

    # 1. install the operator intent through the full HITL loop
    _, session = drive_copilot_dialogue(copilot, operator, scenario.intent_text)
    copilot.apply_intent_to_runtime(session)

    # 2. clean baseline
    runtime.advance_slots(baseline_slots)
    counts: dict[str, int] = {}
    for u in runtime.world.users:
        if u.group == "medical_video":
            counts[u.serving_uav] = counts.get(u.serving_uav, 0) + 1
    target_uav = max(sorted(counts), key=lambda k: counts[k])
    affected = [u.id for u in runtime.world.users if u.serving_uav == target_uav]

    watched = set(affected)

    def window_mean_bps(n: int) -> float:
        # delivery to the users the event hit, wherever they are served;
        # an action that parks them on a useless distant link scores low
        reports = runtime.trace[-n:]
        dt = scenario.config.slot_duration_s
        bits = sum(
            u.served_bits for r in reports for u in r.users if u.user_id in watched
        )
        return bits / (len(reports) * dt)

    pre_event_bps = window_mean_bps(100)

    # 3. the smoke rolls in
    event = SimEvent(
        kind="excess_attenuation",
        target=target_uav,
        magnitude=smoke_db,
        start_slot=runtime.clock_slot,
        end_slot=10**9,
        ceiling_m=smoke_ceiling_m,
    )
    copilot.inject_event(session, event)
    runtime.advance_slots(settle_slots)
    degraded_bps = window_mean_bps(settle_slots)

    # 4. diagnose, then propose and approve the remediation
    diagnosis = copilot.diagnose(session, f"video feed degradation on {target_uav}")
    copilot.submit_intent(session, f"Optimize and fix the degraded link on {target_uav}")
    plan = copilot.propose_plan(session)
    actuation = [s for s in plan.steps if s.side_effecting]
    copilot.decide(session, operator.next_verdict())
    report = copilot.execute(
        session, checkpoint_cb=lambda s, p, i: operator.next_verdict()
    )

    # 5. watch the recovery window
    recovered_at = None
    for i in range(recovery_budget_slots):
        runtime.advance_slot()
        if i >= 99 and recovered_at is None:
            if window_mean_bps(100) >= 0.9 * pre_event_bps:
                recovered_at = i + 1
    post_bps = window_mean_bps(100)

    outcome = {
        "seed": seed,
        "target_uav": target_uav,
        "affected_users": affected,
        "pre_event_bps": pre_event_bps,
        "degraded_bps": degraded_bps,
        "post_bps": post_bps,
        "recovered": post_bps >= 0.9 * pre_event_bps,
        "recovered_at_slot_offset": recovered_at,
        "diagnosis_root_cause": diagnosis.root_cause,
        "proposed_tool": actuation[0].tool_call.tool if actuation else None,
        "proposed_args": actuation[0].tool_call.args if actuation else None,
        "execution_status": report.status,
        "uav_altitude_m": runtime.world.uav(target_uav).altitude_m,
    }
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_audit_bundle(out / f"audit_closed_loop_{seed}.json", scenario, seed, copilot)
        write_trace(out / f"trace_closed_loop_{seed}.ndjson", runtime.trace)
        (out / f"closed_loop_{seed}.json").write_text(json.dumps(outcome, indent=2))
    outcome["copilot"] = copilot
    outcome["session"] = session
    return outcome
