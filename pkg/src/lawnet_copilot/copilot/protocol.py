"""Dialogue protocol: session state machine, audit log, plan containers.

The machine is the safety core of the whole system: side-effecting tools
are reachable only in EXECUTING, and EXECUTING is reachable only through
an operator approval of the exact plan (hash-checked) being executed.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Optional


class ProtocolState(str, Enum):
    IDLE = "IDLE"
    INTENT_RECEIVED = "INTENT_RECEIVED"
    ELICITING = "ELICITING"
    PLANNING = "PLANNING"
    PLAN_PROPOSED = "PLAN_PROPOSED"
    APPROVED = "APPROVED"
    EXECUTING = "EXECUTING"
    REPORTING = "REPORTING"
    REJECTED = "REJECTED"


# every legal edge; anything else is a WrongStateError
_TRANSITIONS: dict[ProtocolState, set[ProtocolState]] = {
    ProtocolState.IDLE: {ProtocolState.INTENT_RECEIVED},
    ProtocolState.INTENT_RECEIVED: {ProtocolState.ELICITING, ProtocolState.PLANNING},
    ProtocolState.ELICITING: {ProtocolState.ELICITING, ProtocolState.PLANNING},
    ProtocolState.PLANNING: {
        ProtocolState.PLAN_PROPOSED,
        ProtocolState.IDLE,
        ProtocolState.ELICITING,  # conflicting modify amendments re-open elicitation
    },
    ProtocolState.PLAN_PROPOSED: {
        ProtocolState.APPROVED,
        ProtocolState.REJECTED,
        ProtocolState.PLANNING,
    },
    ProtocolState.APPROVED: {ProtocolState.EXECUTING},
    ProtocolState.EXECUTING: {
        ProtocolState.REPORTING,
        ProtocolState.REJECTED,
        ProtocolState.PLAN_PROPOSED,  # mid-plan checkpoint pause
    },
    ProtocolState.REPORTING: {ProtocolState.IDLE},
    ProtocolState.REJECTED: {ProtocolState.IDLE},
}


class WrongStateError(RuntimeError):
    """Operation attempted outside its legal protocol state."""


@dataclass
class ToolCall:
    tool: str
    args: dict
    session_id: str = ""
    plan_id: str = ""
    call_id: str = ""

    def canonical(self) -> dict:
        return {"tool": self.tool, "args": self.args, "call_id": self.call_id}


@dataclass
class ToolResult:
    status: str  # "ok" | "error"
    payload: object
    slot_stamp: int
    result_id: str = ""
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PlanStep:
    stage_label: str
    rationale: str
    evidence: list[str] = field(default_factory=list)
    tool_call: Optional[ToolCall] = None
    side_effecting: bool = False
    result: Optional[ToolResult] = None

    def canonical(self) -> dict:
        return {
            "stage_label": self.stage_label,
            "rationale": self.rationale,
            "evidence": list(self.evidence),
            "tool_call": self.tool_call.canonical() if self.tool_call else None,
            "side_effecting": self.side_effecting,
        }

    def to_dict(self) -> dict:
        d = self.canonical()
        d["result"] = self.result.to_dict() if self.result else None
        return d


@dataclass
class Plan:
    plan_id: str
    task_kind: str
    steps: list[PlanStep] = field(default_factory=list)
    checkpoints: list[int] = field(default_factory=list)
    status: str = "proposed"  # proposed | approved | executing | done | rejected

    def content_hash(self) -> str:
        canon = {
            "plan_id": self.plan_id,
            "task_kind": self.task_kind,
            "steps": [s.canonical() for s in self.steps],
            "checkpoints": list(self.checkpoints),
        }
        return hashlib.sha256(
            json.dumps(canon, sort_keys=True).encode()
        ).hexdigest()

    def to_dict(self) -> dict:
        return {
            "plan_id": self.plan_id,
            "task_kind": self.task_kind,
            "steps": [s.to_dict() for s in self.steps],
            "checkpoints": list(self.checkpoints),
            "status": self.status,
            "hash": self.content_hash(),
        }


@dataclass
class AuditEntry:
    seq: int
    slot_stamp: int
    kind: str
    payload: dict

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Turn:
    speaker: str  # "operator" | "copilot"
    text: str
    slot_stamp: int


class DialogueSession:
    """One operator conversation; its audit log is append-only."""

    def __init__(self, session_id: str):
        self.session_id = session_id
        self.state = ProtocolState.IDLE
        self.history: list[Turn] = []
        self.intent = None  # StructuredIntent once resolved
        self.intent_report = None  # AmbiguityReport while eliciting
        self.current_plan: Optional[Plan] = None
        self.past_plans: list[Plan] = []
        self.approved_plan_hash: Optional[str] = None
        self.paused_at_checkpoint: Optional[int] = None
        self.resume_step_index = 0
        self.cleared_checkpoints: set[int] = set()
        self.last_diagnosis = None
        self.audit_log: list[AuditEntry] = []
        self._audit_seq = 0

    @property
    def pending_ambiguities(self) -> list:
        return self.intent_report.unresolved() if self.intent_report else []

    def transition(self, new_state: ProtocolState, slot: int, reason: str = "") -> None:
        if new_state not in _TRANSITIONS[self.state]:
            raise WrongStateError(
                f"illegal transition {self.state.value} -> {new_state.value}"
            )
        self.audit(
            "state_transition",
            {"from": self.state.value, "to": new_state.value, "reason": reason},
            slot,
        )
        self.state = new_state

    def audit(self, kind: str, payload: dict, slot: int) -> AuditEntry:
        entry = AuditEntry(self._audit_seq, slot, kind, payload)
        self._audit_seq += 1
        self.audit_log.append(entry)
        return entry

    def add_turn(self, speaker: str, text: str, slot: int) -> None:
        self.history.append(Turn(speaker, text, slot))

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "state": self.state.value,
            "history": [asdict(t) for t in self.history],
            "intent": self.intent.to_dict() if self.intent else None,
            "pending_ambiguities": [a.to_dict() for a in self.pending_ambiguities],
            "current_plan": self.current_plan.to_dict() if self.current_plan else None,
            "approved_plan_hash": self.approved_plan_hash,
            "paused_at_checkpoint": self.paused_at_checkpoint,
            "audit_log": [e.to_dict() for e in self.audit_log],
        }

    def audit_as_json(self) -> str:
        return json.dumps([e.to_dict() for e in self.audit_log], sort_keys=True)
