"""The cognitive engine: sessions, pipeline dispatch, gated execution.

One Copilot serves many sessions against one NetworkRuntime. Plans touch
the world only through the tool registry, and only while their session is
EXECUTING an operator-approved plan. Every decision is audited; replaying
a session's audit log against a fresh runtime reproduces the run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from ..runtime import NetworkRuntime
from ..allocator import IntentWeights
from ..sim.energy import propulsion_power, remaining_endurance_s
from ..sim.world import UavCommand
from .protocol import (
    DialogueSession,
    ProtocolState,
    Plan,
    WrongStateError,
    ToolCall,
)
from .intent import (
    parse_intent,
    finalize_intent,
    resolve_ambiguity,
    question_for,
    Ambiguity,
    AmbiguityReport,
    StructuredIntent,
    ClarifyingQuestion,
    ParserContext,
    UnparseableIntentError,
)
from .pipelines import derive_weights, intent_constraints, build_allocate_plan
from .diagnostics import run_diagnosis, Diagnosis, InsufficientTelemetryError
from .optimizer import optimize as build_optimize_plan, NoImprovingActionError
from .design import design_network, generate_config, Blueprint, NoFeasibleDesignError
from .reasoner import RuleReasoner

ENDURANCE_EVAL_SLOTS = 50


class PlanningFailedError(RuntimeError):
    pass


class NoAmbiguityError(RuntimeError):
    pass


@dataclass
class ExecutionReport:
    plan_id: str
    status: str  # completed | paused | halted | empty
    started_slot: int
    finished_slot: int
    steps_run: int
    results: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "plan_id": self.plan_id,
            "status": self.status,
            "started_slot": self.started_slot,
            "finished_slot": self.finished_slot,
            "steps_run": self.steps_run,
            "results": self.results,
        }


class Copilot:
    def __init__(self, runtime: NetworkRuntime, reasoner=None):
        # deferred import: the toolkit module types its sessions against
        # this package, so binding happens at construction time
        from ..toolkit import build_default_registry

        self.runtime = runtime
        self.reasoner = reasoner or RuleReasoner()
        self.registry = build_default_registry(runtime)
        self.sessions: dict[str, DialogueSession] = {}
        self._session_counter = 0
        self._plan_counter = 0
        self.parser_context = ParserContext(
            sectors=[s.name for s in runtime.scenario.config.sectors],
            classes=sorted({g.kind for g in runtime.scenario.config.user_groups})
            or ["sar_urllc", "medical_video", "civilian_bursty"],
        )

    # ------------------------------------------------------------- sessions

    def open_session(self) -> DialogueSession:
        self._session_counter += 1
        session = DialogueSession(f"sess-{self._session_counter:04d}")
        session.audit("session_opened", {}, self.runtime.clock_slot)
        self.sessions[session.session_id] = session
        return session

    def session(self, session_id: str) -> DialogueSession:
        if session_id not in self.sessions:
            raise KeyError(f"no such session {session_id!r}")
        return self.sessions[session_id]

    # --------------------------------------------------------------- intent

    def submit_intent(self, session: DialogueSession, text: str):
        """Returns the StructuredIntent, or a ClarifyingQuestion to answer."""
        slot = self.runtime.clock_slot
        normalized = self.reasoner.normalize(text)
        session.add_turn("operator", text, slot)
        session.transition(ProtocolState.INTENT_RECEIVED, slot, "intent submitted")
        session.audit("intent_submitted", {"text": text}, slot)
        parsed = parse_intent(normalized, self.parser_context)
        if isinstance(parsed, AmbiguityReport):
            session.intent_report = parsed
            session.audit("ambiguity_raised", parsed.to_dict(), slot)
            return self.elicit(session)
        session.intent = parsed
        session.audit("intent_parsed", parsed.to_dict(), slot)
        session.transition(ProtocolState.PLANNING, slot, "intent fully specified")
        return parsed

    def elicit(self, session: DialogueSession) -> ClarifyingQuestion:
        slot = self.runtime.clock_slot
        if session.state not in (ProtocolState.INTENT_RECEIVED, ProtocolState.ELICITING):
            raise WrongStateError(f"cannot elicit in state {session.state.value}")
        if not session.intent_report or not session.intent_report.unresolved():
            raise NoAmbiguityError("nothing to clarify")
        session.transition(ProtocolState.ELICITING, slot, "clarification needed")
        question = question_for(session.intent_report)
        session.add_turn("copilot", question.prompt, slot)
        session.audit("elicitation_asked", question.to_dict(), slot)
        return question

    def answer_elicitation(self, session: DialogueSession, choice: str):
        """Resolve one ambiguity; next question or the finalized intent."""
        slot = self.runtime.clock_slot
        if session.state != ProtocolState.ELICITING:
            raise WrongStateError(f"no elicitation open in state {session.state.value}")
        report = session.intent_report
        open_ambs = report.unresolved()
        if not open_ambs:
            raise NoAmbiguityError("no open ambiguity")
        idx = report.ambiguities.index(open_ambs[0])
        resolve_ambiguity(report, idx, choice)
        session.add_turn("operator", choice, slot)
        session.audit("elicitation_answered", {"index": idx, "choice": choice}, slot)
        if report.unresolved():
            return self.elicit(session)
        final = finalize_intent(report, self.parser_context)
        if isinstance(final, AmbiguityReport):
            session.intent_report = final
            session.audit("ambiguity_raised", final.to_dict(), slot)
            return self.elicit(session)
        session.intent = final
        session.intent_report = None
        session.audit("intent_parsed", final.to_dict(), slot)
        session.transition(ProtocolState.PLANNING, slot, "all ambiguities resolved")
        return final

    # ------------------------------------------------------------- planning

    def _next_plan_id(self) -> str:
        self._plan_counter += 1
        return f"plan-{self._plan_counter:04d}"

    def propose_plan(self, session: DialogueSession) -> Plan:
        slot = self.runtime.clock_slot
        if session.state != ProtocolState.PLANNING:
            raise WrongStateError(f"cannot plan in state {session.state.value}")
        if session.intent is None:
            raise PlanningFailedError("no resolved intent")
        intent: StructuredIntent = session.intent
        plan_id = self._next_plan_id()
        try:
            builder = {
                "allocate": self._plan_allocate,
                "configure": self._plan_configure,
                "design": self._plan_design,
                "diagnose": self._plan_diagnose,
                "optimize": self._plan_optimize,
            }[intent.task_kind]
            plan = builder(session, intent, plan_id)
        except (
            NoImprovingActionError,
            NoFeasibleDesignError,
            InsufficientTelemetryError,
        ) as exc:
            session.audit("planning_failed", {"reason": str(exc)}, slot)
            session.transition(ProtocolState.IDLE, slot, "planning failed")
            raise PlanningFailedError(str(exc)) from exc

        ok, endurance = self._endurance_at_proposal(plan)
        session.audit(
            "endurance_check",
            {
                "plan_id": plan_id,
                "fleet_endurance_s": endurance,
                "floor_s": self._active_weights(session).endurance_floor_s,
                "passed": ok,
            },
            slot,
        )
        if not ok:
            session.audit(
                "planning_failed",
                {"reason": f"twin endurance {endurance:.0f} s below floor"},
                slot,
            )
            session.transition(ProtocolState.IDLE, slot, "endurance floor")
            raise PlanningFailedError(
                f"twin-evaluated fleet endurance {endurance:.0f} s breaches the floor"
            )

        session.current_plan = plan
        session.resume_step_index = 0
        session.cleared_checkpoints = set()
        session.paused_at_checkpoint = None
        session.audit("plan_proposed", plan.to_dict(), slot)
        session.transition(ProtocolState.PLAN_PROPOSED, slot, "plan ready for review")
        return plan

    def _active_weights(self, session: DialogueSession) -> IntentWeights:
        if session.intent is not None:
            return derive_weights(session.intent, self.runtime.weights)
        return self.runtime.weights

    def _plan_allocate(self, session, intent, plan_id) -> Plan:
        weights = derive_weights(intent, self.runtime.weights)
        docs = self.runtime.kb.retrieve(intent.raw_text, k=3)
        if not docs:
            docs = self.runtime.kb.retrieve("policy resource allocation", k=3)
        kpi_result = None
        if self.runtime.trace:
            result = self.registry.invoke(
                session,
                ToolCall(
                    tool="get_kpi_report",
                    args={"slice_id": "all", "time_window": 100},
                    session_id=session.session_id,
                    plan_id=plan_id,
                    call_id=f"{plan_id}-baseline",
                ),
            )
            if result.status == "ok":
                kpi_result = result.result_id
        return build_allocate_plan(
            plan_id,
            session.session_id,
            intent,
            weights,
            "intent_weighted_pf",
            [d.doc_id for d in docs],
            kpi_result,
            self.reasoner,
        )

    def _plan_diagnose(self, session, intent, plan_id) -> Plan:
        diagnosis = run_diagnosis(self, session, intent.raw_text)
        session.last_diagnosis = diagnosis
        steps = []
        from .protocol import PlanStep

        for stage in ("data_gathering", "ran_analysis", "backhaul_core", "validation"):
            findings = diagnosis.findings.get(stage, [])
            steps.append(
                PlanStep(
                    stage_label=stage,
                    rationale="; ".join(findings) if findings else "no anomaly found",
                    evidence=list(diagnosis.evidence),
                )
            )
        steps.append(
            PlanStep(
                stage_label="conclusion",
                rationale=f"root cause: {diagnosis.root_cause}",
                evidence=list(diagnosis.evidence),
            )
        )
        return Plan(plan_id=plan_id, task_kind="diagnose", steps=steps, checkpoints=[3])

    def _plan_optimize(self, session, intent, plan_id) -> Plan:
        import re as _re

        diagnosis = session.last_diagnosis
        if diagnosis is None or diagnosis.root_cause == "inconclusive":
            diagnosis = run_diagnosis(self, session, intent.raw_text)
            session.last_diagnosis = diagnosis
        if diagnosis.root_cause == "inconclusive":
            names_node = _re.search(r"\buav[-_ ]?\d+\b", intent.raw_text.lower())
            if intent.objectives and not names_node:
                # nothing is broken; treat the ask as a preference shift
                session.audit(
                    "optimize_fallback",
                    {"reason": "no confirmed fault; re-weighting instead"},
                    self.runtime.clock_slot,
                )
                return self._plan_allocate(session, intent, plan_id)
            raise NoImprovingActionError("diagnosis is inconclusive; nothing to optimize")
        return build_optimize_plan(self, session, diagnosis, plan_id)

    def _plan_design(self, session, intent, plan_id) -> Plan:
        weights = derive_weights(intent, self.runtime.weights)
        constraints = intent_constraints(intent, weights)
        blueprint = design_network(
            intent, self.runtime.world, weights, constraints
        )
        script = generate_config(blueprint, self.runtime.world, name=f"design-{plan_id}")
        return self._deployment_plan(
            session, plan_id, "design", blueprint, script, weights
        )

    def _plan_configure(self, session, intent, plan_id) -> Plan:
        weights = derive_weights(intent, self.runtime.weights)
        world = self.runtime.world
        placements = [
            {
                "uav_id": u.id,
                "x": u.position[0],
                "y": u.position[1],
                "altitude_m": u.altitude_m,
                "role": u.role,
            }
            for u in world.uavs
        ]
        blueprint = Blueprint(
            uav_placements=placements,
            radio_config=[{"tx_power_dbm": u.tx_power_dbm} for u in world.uavs],
            allocation_weights=weights,
            validation_report={"source": "current deployment"},
        )
        script = generate_config(blueprint, world, name=f"configure-{plan_id}")
        return self._deployment_plan(
            session, plan_id, "configure", blueprint, script, weights
        )

    def _deployment_plan(
        self, session, plan_id, kind, blueprint: Blueprint, script: dict, weights
    ) -> Plan:
        import json as _json

        from ..knowledge import KnowledgeDoc
        from .protocol import PlanStep

        doc = KnowledgeDoc(
            doc_id=f"blueprint-{plan_id}",
            kind="telemetry",
            title=f"validated blueprint for plan {plan_id}",
            body=_json.dumps(blueprint.to_dict(), sort_keys=True, default=str),
            tags=["blueprint", kind],
            slot_stamp=self.runtime.clock_slot,
        )
        self.runtime.kb.ingest(doc)
        evidence = [doc.doc_id]
        steps = [
            PlanStep(
                stage_label="blueprint_summary",
                rationale=self.reasoner.rationale(
                    "blueprint_summary",
                    {
                        "placements": blueprint.uav_placements,
                        "dry_run": script.get("dry_run", {}),
                    },
                ),
                evidence=evidence,
            ),
            PlanStep(
                stage_label="operator_checkpoint",
                rationale="Review placements, radio plan and dry-run evidence.",
                evidence=evidence,
            ),
            PlanStep(
                stage_label="deploy_configuration",
                rationale="Push the validated configuration package.",
                evidence=evidence,
                side_effecting=True,
                tool_call=ToolCall(
                    tool="deploy_network_slice",
                    args={"config_json": script},
                    session_id=session.session_id,
                    plan_id=plan_id,
                    call_id=f"{plan_id}-deploy",
                ),
            ),
        ]
        return Plan(plan_id=plan_id, task_kind=kind, steps=steps, checkpoints=[1])

    # ---------------------------------------------------------- twin checks

    def _endurance_at_proposal(self, plan: Plan) -> tuple[bool, float]:
        """Fleet-average endurance after enacting the plan on a fork."""
        twin = self.runtime.fork_world(branch_seed=300)
        commands = []
        for step in plan.steps:
            if not step.side_effecting or step.tool_call is None:
                continue
            commands.extend(_tool_call_to_commands(step.tool_call, twin))
        for cmd in commands:
            twin._apply_command(cmd)
        from ..allocator import Scheduler, EmptyWorldError
        from ..sim.world import AllocationDecision

        sched = Scheduler(self.runtime.scheme)
        sched.ema_bps = dict(self.runtime.scheduler.ema_bps)
        for _ in range(ENDURANCE_EVAL_SLOTS):
            try:
                alloc = sched.allocate(twin, self.runtime.weights)
            except EmptyWorldError:
                alloc = AllocationDecision(slot=twin.clock_slot)
            twin.step(alloc)
        hover = propulsion_power(0.0, twin.config.energy)
        vals = [
            remaining_endurance_s(u.battery_j, hover)
            for u in twin.uavs
            if u.operational
        ]
        endurance = sum(vals) / len(vals) if vals else 0.0
        floor = self.runtime.weights.endurance_floor_s
        return endurance >= floor, endurance

    # ------------------------------------------------------------- verdicts

    def decide(
        self, session: DialogueSession, verdict: str, text: Optional[str] = None
    ):
        slot = self.runtime.clock_slot
        if session.state != ProtocolState.PLAN_PROPOSED:
            raise WrongStateError(
                f"no plan awaiting verdict in state {session.state.value}"
            )
        session.audit("verdict", {"verdict": verdict, "text": text}, slot)
        if verdict == "approve":
            plan = session.current_plan
            session.approved_plan_hash = plan.content_hash()
            plan.status = "approved"
            if session.paused_at_checkpoint is not None:
                # re-approval at a mid-plan checkpoint clears it
                session.cleared_checkpoints.add(session.paused_at_checkpoint)
                session.paused_at_checkpoint = None
            session.transition(ProtocolState.APPROVED, slot, "operator approved")
            return session
        if verdict == "reject":
            if session.current_plan:
                session.current_plan.status = "rejected"
                session.past_plans.append(session.current_plan)
            session.current_plan = None
            session.approved_plan_hash = None
            session.transition(ProtocolState.REJECTED, slot, "operator rejected")
            session.transition(ProtocolState.IDLE, slot, "rejection archived")
            return session
        if verdict == "modify":
            if not text:
                raise ValueError("modify requires amendment text")
            session.transition(ProtocolState.PLANNING, slot, "modification requested")
            if session.current_plan:
                session.current_plan.status = "superseded"
                session.past_plans.append(session.current_plan)
                session.current_plan = None
            session.approved_plan_hash = None
            amended = self._merge_amendment(session, text)
            if isinstance(amended, ClarifyingQuestion):
                return amended
            return self.propose_plan(session)
        raise ValueError(f"unknown verdict {verdict!r}")

    def _merge_amendment(self, session: DialogueSession, text: str):
        slot = self.runtime.clock_slot
        session.add_turn("operator", text, slot)
        try:
            parsed = parse_intent(self.reasoner.normalize(text), self.parser_context)
        except UnparseableIntentError as exc:
            raise PlanningFailedError(f"amendment unparseable: {exc}") from exc
        if isinstance(parsed, AmbiguityReport):
            session.intent_report = parsed
            session.audit("ambiguity_raised", parsed.to_dict(), slot)
            session.transition(ProtocolState.ELICITING, slot, "amendment ambiguous")
            return question_for(parsed)
        intent: StructuredIntent = session.intent
        # amendments merge additively; objectives/constraints only
        conflict = None
        for new_c in parsed.constraints:
            for old_c in intent.constraints:
                same_scope = (
                    old_c.metric == new_c.metric
                    and old_c.traffic_class == new_c.traffic_class
                    and old_c.sector == new_c.sector
                )
                if same_scope and old_c.direction != new_c.direction:
                    continue  # complementary bound, fine
                if same_scope and old_c.bound != new_c.bound:
                    conflict = (old_c, new_c)
        if conflict:
            report = AmbiguityReport(
                raw_text=text,
                ambiguities=[
                    Ambiguity(
                        "metric",
                        f"conflicting bounds for {conflict[0].metric}",
                        [str(conflict[0].bound), str(conflict[1].bound)],
                    )
                ],
            )
            session.intent_report = report
            session.transition(ProtocolState.ELICITING, slot, "conflicting amendment")
            return question_for(report)
        intent.constraints.extend(parsed.constraints)
        for obj in parsed.objectives:
            if obj.to_dict() not in [o.to_dict() for o in intent.objectives]:
                intent.objectives.append(obj)
        intent.raw_text = intent.raw_text + " | " + text
        session.audit("intent_amended", intent.to_dict(), slot)
        return intent

    # ------------------------------------------------------------ execution

    def execute(
        self,
        session: DialogueSession,
        checkpoint_cb: Optional[Callable[[DialogueSession, Plan, int], str]] = None,
    ) -> ExecutionReport:
        slot = self.runtime.clock_slot
        if session.state != ProtocolState.APPROVED:
            raise WrongStateError(f"cannot execute in state {session.state.value}")
        plan = session.current_plan
        if plan is None or session.approved_plan_hash != plan.content_hash():
            raise WrongStateError("approved plan hash mismatch")
        session.transition(ProtocolState.EXECUTING, slot, "execution started")
        plan.status = "executing"
        session.audit("execution_started", {"plan_id": plan.plan_id}, slot)

        if not plan.steps:
            plan.status = "done"
            session.audit("execution_report", {"plan_id": plan.plan_id, "steps": 0}, slot)
            session.transition(ProtocolState.REPORTING, slot, "empty plan")
            session.transition(ProtocolState.IDLE, slot, "report delivered")
            return ExecutionReport(plan.plan_id, "empty", slot, slot, 0)

        started = slot
        results: list[dict] = []
        i = session.resume_step_index
        while i < len(plan.steps):
            if i in plan.checkpoints and i not in session.cleared_checkpoints:
                if checkpoint_cb is None:
                    session.resume_step_index = i
                    session.paused_at_checkpoint = i
                    plan.status = "approved"
                    session.transition(
                        ProtocolState.PLAN_PROPOSED,
                        self.runtime.clock_slot,
                        f"checkpoint at step {i}",
                    )
                    session.audit(
                        "checkpoint_paused", {"plan_id": plan.plan_id, "step": i}, slot
                    )
                    return ExecutionReport(
                        plan.plan_id, "paused", started, self.runtime.clock_slot, len(results), results
                    )
                verdict = checkpoint_cb(session, plan, i)
                session.audit(
                    "checkpoint_verdict",
                    {"plan_id": plan.plan_id, "step": i, "verdict": verdict},
                    self.runtime.clock_slot,
                )
                if verdict != "approve":
                    return self._halt(session, plan, started, results, "checkpoint rejected")
                session.cleared_checkpoints.add(i)
            step = plan.steps[i]
            if step.tool_call is not None:
                call = step.tool_call
                call.session_id = session.session_id
                call.plan_id = plan.plan_id
                result = self.registry.invoke(session, call)
                step.result = result
                results.append(
                    {"step": i, "tool": call.tool, "status": result.status, "result_id": result.result_id}
                )
                if result.status != "ok":
                    return self._halt(
                        session, plan, started, results, f"tool failure: {result.error}"
                    )
            else:
                results.append({"step": i, "tool": None, "status": "ok", "result_id": None})
            i += 1
            session.resume_step_index = i

        plan.status = "done"
        session.paused_at_checkpoint = None
        end_slot = self.runtime.clock_slot
        snapshot_id = self.runtime.ingest_snapshot()  # grounding: execution window
        report = ExecutionReport(plan.plan_id, "completed", started, end_slot, len(results), results)
        payload = report.to_dict()
        payload["telemetry_snapshot"] = snapshot_id
        session.audit("execution_report", payload, end_slot)
        session.transition(ProtocolState.REPORTING, end_slot, "plan completed")
        session.transition(ProtocolState.IDLE, end_slot, "report delivered")
        session.past_plans.append(plan)
        session.current_plan = None
        session.approved_plan_hash = None
        session.resume_step_index = 0
        return report

    def _halt(self, session, plan, started, results, reason: str) -> ExecutionReport:
        slot = self.runtime.clock_slot
        dropped = self.runtime.clear_pending_commands()
        plan.status = "rejected"
        session.audit(
            "execution_halted",
            {"plan_id": plan.plan_id, "reason": reason, "rolled_back_commands": dropped},
            slot,
        )
        session.transition(ProtocolState.REJECTED, slot, reason)
        session.transition(ProtocolState.IDLE, slot, "halt archived")
        session.past_plans.append(plan)
        session.current_plan = None
        session.approved_plan_hash = None
        session.resume_step_index = 0
        return ExecutionReport(plan.plan_id, "halted", started, slot, len(results), results)

    # ----------------------------------------------------------- diagnostics

    def diagnose(self, session: DialogueSession, symptom: str) -> Diagnosis:
        diagnosis = run_diagnosis(self, session, symptom)
        session.last_diagnosis = diagnosis
        return diagnosis

    def inject_event(self, session: DialogueSession, event) -> str:
        """World disturbance recorded in the session audit (replayable)."""
        event_id = self.runtime.inject_event(event)
        session.audit("event_injected", event.to_dict(), self.runtime.clock_slot)
        return event_id

    def apply_intent_to_runtime(self, session: DialogueSession) -> None:
        """Install weights/constraints derived from the session's intent."""
        if session.intent is None:
            return
        weights = derive_weights(session.intent, self.runtime.weights)
        self.runtime.set_weights(weights)
        self.runtime.set_constraints(intent_constraints(session.intent, weights))


def _tool_call_to_commands(call: ToolCall, world) -> list[UavCommand]:
    """Map a side-effecting call onto raw world commands for twin evaluation."""
    if call.tool == "set_flight_altitude":
        uav_id = call.args["uav_id"]
        if "delta_m" in call.args:
            return [UavCommand(uav_id, "altitude_delta", float(call.args["delta_m"]))]
        uav = world.uav(uav_id)
        return [
            UavCommand(
                uav_id, "altitude_delta", float(call.args["new_altitude_m"]) - uav.altitude_m
            )
        ]
    if call.tool == "update_ran_parameters":
        uav_id = call.args["gnodeb_id"]
        params = call.args.get("params", {})
        cmds = []
        if "tx_power_dbm" in params:
            cmds.append(UavCommand(uav_id, "tx_power_dbm", params["tx_power_dbm"]))
        if "reattach_users" in params:
            cmds.append(UavCommand(uav_id, "reattach", list(params["reattach_users"])))
        if "role" in params:
            cmds.append(UavCommand(uav_id, "set_role", params["role"]))
        return cmds
    if call.tool == "deploy_network_slice":
        script = call.args.get("config_json", {})
        cmds = []
        for radio in script.get("radio", []) if isinstance(script, dict) else []:
            if "tx_power_dbm" in radio:
                cmds.append(UavCommand(radio["uav_id"], "tx_power_dbm", radio["tx_power_dbm"]))
            if "altitude_m" in radio:
                uav = world.uav(radio["uav_id"])
                cmds.append(
                    UavCommand(
                        radio["uav_id"], "altitude_delta", radio["altitude_m"] - uav.altitude_m
                    )
                )
        return cmds
    return []
