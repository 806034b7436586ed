"""Cognitive engine: intent parsing, HITL protocol, task pipelines."""

from .protocol import (
    ProtocolState,
    DialogueSession,
    Plan,
    PlanStep,
    ToolCall,
    ToolResult,
    AuditEntry,
    WrongStateError,
)
from .intent import (
    StructuredIntent,
    Objective,
    Constraint,
    AmbiguityReport,
    Ambiguity,
    ClarifyingQuestion,
    ParserContext,
    parse_intent,
    UnparseableIntentError,
)
from .pipelines import derive_weights, intent_constraints
from .diagnostics import Diagnosis, run_diagnosis, InsufficientTelemetryError
from .design import Blueprint, design_network, generate_config, NoFeasibleDesignError
from .configgen import (
    validate_config_script,
    dry_run_script,
    ConfigSchemaViolation,
    DryRunFailure,
)
from .optimizer import NoImprovingActionError
from .engine import Copilot, ExecutionReport, PlanningFailedError
from .reasoner import RuleReasoner, ChatReasoner, make_reasoner

__all__ = [
    "ProtocolState",
    "DialogueSession",
    "Plan",
    "PlanStep",
    "ToolCall",
    "ToolResult",
    "AuditEntry",
    "WrongStateError",
    "StructuredIntent",
    "Objective",
    "Constraint",
    "AmbiguityReport",
    "Ambiguity",
    "ClarifyingQuestion",
    "ParserContext",
    "parse_intent",
    "UnparseableIntentError",
    "derive_weights",
    "intent_constraints",
    "Diagnosis",
    "run_diagnosis",
    "InsufficientTelemetryError",
    "Blueprint",
    "design_network",
    "generate_config",
    "NoFeasibleDesignError",
    "validate_config_script",
    "dry_run_script",
    "ConfigSchemaViolation",
    "DryRunFailure",
    "NoImprovingActionError",
    "Copilot",
    "ExecutionReport",
    "PlanningFailedError",
    "RuleReasoner",
    "ChatReasoner",
    "make_reasoner",
]
