"""Grammar-based intent extraction with explicit ambiguity surfacing.

A pluggable reasoner may pre-normalize free text, but this grammar is
authoritative: objectives and constraints only ever come from recognized
(metric, direction, scope) patterns, never from generated text. Anything
underspecified becomes an AmbiguityReport the protocol can elicit on.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, asdict
from typing import Optional

METRICS = ("latency", "throughput", "reliability", "endurance", "coverage", "isr")

# keyword families mapping surface forms to canonical metrics; order matters,
# most specific first ("degraded link" falls through to throughput)
_METRIC_CUES: list[tuple[str, str]] = [
    (r"\burllc\b|\blatenc", "latency"),
    (r"\bthroughput\b|\bbandwidth\b|\bvideo\b|\bbit ?rate\b", "throughput"),
    (r"\breliab", "reliability"),
    (r"\bbattery\b|\bendurance\b|\bflight time\b", "endurance"),
    (r"\bcoverage\b", "coverage"),
    (r"\bintent satisfaction\b|\bisr\b", "isr"),
    (r"\blink\b|\bqoe\b|\bfeed\b", "throughput"),
]

_CLASS_CUES: list[tuple[str, str]] = [
    (r"\bsar\b|\brescue\b|\brobot", "sar_urllc"),
    (r"\bmedical\b|\bvideo\b|\bhospital\b|\bembb\b", "medical_video"),
    (r"\bcivilian\b|\btrapped\b|\bstatus update", "civilian_bursty"),
]

_TASK_CUES: list[tuple[str, str]] = [
    (r"\bdiagnos|\broot cause\b|\bwhy\b|\binvestigat", "diagnose"),
    (r"\bdesign\b|\bestablish\b|\bplan a network\b|\bplace\b|\bdeploy(?!ment)\b", "design"),
    (r"\bconfigure\b|\bconfiguration\b|\bprovision\b|\bset up\b", "configure"),
    (r"\boptimi[sz]e\b|\bimprove\b|\bfix\b|\brecover\b|\bmitigate\b", "optimize"),
    (r"\ballocat|\bprioriti[sz]e\b|\bschedul|\bresource", "allocate"),
]


class UnparseableIntentError(ValueError):
    """No metric could be recognized anywhere in the text."""


@dataclass
class Objective:
    metric: str
    direction: str  # "minimize" | "maximize"
    sector: Optional[str] = None
    traffic_class: Optional[str] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Constraint:
    metric: str
    direction: str  # "max" (<= bound) | "min" (>= bound)
    bound: float
    sector: Optional[str] = None
    traffic_class: Optional[str] = None  # None: fleet-wide

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class StructuredIntent:
    task_kind: str
    objectives: list[Objective] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    raw_text: str = ""

    def to_dict(self) -> dict:
        return {
            "task_kind": self.task_kind,
            "objectives": [o.to_dict() for o in self.objectives],
            "constraints": [c.to_dict() for c in self.constraints],
            "raw_text": self.raw_text,
        }


@dataclass
class Ambiguity:
    field_name: str  # "metric" | "sector"
    context: str
    candidates: list[str]
    resolution: Optional[str] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AmbiguityReport:
    raw_text: str
    ambiguities: list[Ambiguity]

    def unresolved(self) -> list[Ambiguity]:
        return [a for a in self.ambiguities if a.resolution is None]

    def to_dict(self) -> dict:
        return {
            "raw_text": self.raw_text,
            "ambiguities": [a.to_dict() for a in self.ambiguities],
        }


@dataclass
class ClarifyingQuestion:
    prompt: str
    options: list[str]
    ambiguity_index: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ParserContext:
    """What the grammar is allowed to bind scope names to."""

    sectors: list[str] = field(default_factory=list)
    classes: list[str] = field(
        default_factory=lambda: ["sar_urllc", "medical_video", "civilian_bursty"]
    )
    slices: dict[str, str] = field(default_factory=dict)  # slice alias -> class

    def resolve_slice(self, name: str) -> Optional[str]:
        name = name.lower()
        if name in self.slices:
            return self.slices[name]
        if "urllc" in name:
            return "sar_urllc"
        if "video" in name or "embb" in name:
            return "medical_video"
        return None


_NUM = r"(\d+(?:\.\d+)?)"
_BOUND_RE = re.compile(
    rf"(below|under|at most|no more than|less than|exceeds?|above|over|at least|no less than)\s+{_NUM}\s*(ms|milliseconds?|s|seconds?|minutes?|min|mbps|gbps|kbps)",
    re.IGNORECASE,
)
# "cap X at N", "limit X to N": an upper bound without a comparator word
_CAP_RE = re.compile(
    rf"\b(?:cap|caps|capped|limit|limits|limited)\b[^,;.]*?\b(?:at|to)\s+{_NUM}\s*(ms|milliseconds?|s|seconds?|minutes?|min|mbps|gbps|kbps)",
    re.IGNORECASE,
)

_SECTOR_RE = re.compile(r"\bsector\s+([a-z0-9_-]+)", re.IGNORECASE)
_SLICE_RE = re.compile(r"\bslice\s+([a-z0-9_-]+)", re.IGNORECASE)


def _to_si(value: float, unit: str) -> float:
    unit = unit.lower()
    if unit.startswith("ms") or unit.startswith("millisecond"):
        return value / 1000.0
    if unit in ("s",) or unit.startswith("second"):
        return value
    if unit.startswith("min"):
        return value * 60.0
    if unit == "kbps":
        return value * 1e3
    if unit == "mbps":
        return value * 1e6
    if unit == "gbps":
        return value * 1e9
    return value


def _bound_direction(word: str) -> str:
    return "min" if word.lower() in ("exceed", "exceeds", "above", "over", "at least", "no less than") else "max"


def parse_intent(text: str, context: Optional[ParserContext] = None):
    """Extract a StructuredIntent, or an AmbiguityReport when underspecified.

    Raises UnparseableIntentError when not even an ambiguous metric shows up.
    """
    if not text or not text.strip():
        raise UnparseableIntentError("empty intent text")
    ctx = context or ParserContext()
    low = text.lower()

    # split on clause separators so scopes bind to their own clause
    clauses = re.split(r"[,;]| and | while ", low)
    ambiguities: list[Ambiguity] = []
    objectives: list[Objective] = []
    constraints: list[Constraint] = []

    any_metric_cue = False
    for clause in clauses:
        clause = clause.strip()
        if not clause:
            continue
        metric = None
        for pattern, name in _METRIC_CUES:
            if re.search(pattern, clause):
                metric = name
                any_metric_cue = True
                break

        sector = None
        m = _SECTOR_RE.search(clause)
        if m:
            cand = m.group(1).upper()
            known = {s.upper(): s for s in ctx.sectors}
            if cand in known:
                sector = known[cand]
            elif ctx.sectors:
                ambiguities.append(
                    Ambiguity("sector", clause, sorted(ctx.sectors))
                )
        traffic_class = None
        for pattern, name in _CLASS_CUES:
            if re.search(pattern, clause) and name in ctx.classes:
                traffic_class = name
                break
        sm = _SLICE_RE.search(clause)
        if sm and traffic_class is None:
            traffic_class = ctx.resolve_slice(sm.group(1))

        bound = _BOUND_RE.search(clause)
        if metric is None:
            # vague quality words with no measurable metric: ask
            if re.search(r"\bperformance\b|\bquality\b|\bbetter\b|\bimprove\b", clause):
                ambiguities.append(
                    Ambiguity(
                        "metric",
                        clause,
                        ["throughput", "latency"],
                    )
                )
            continue

        direction = "minimize" if metric in ("latency",) else "maximize"
        if re.search(r"\breduce\b|\blower\b|\bminimi[sz]e\b|\bcut\b", clause):
            direction = "minimize"
        if re.search(r"\bmaximi[sz]e\b|\braise\b|\bboost\b|\bincrease\b", clause):
            direction = "maximize"
        action_verb = re.search(
            r"\bprioriti[sz]e\b|\bmaximi[sz]e\b|\bminimi[sz]e\b|\breduce\b|\braise\b"
            r"|\bboost\b|\bincrease\b|\bcut\b|\blower\b",
            clause,
        )

        cap = _CAP_RE.search(clause) if not bound else None
        if bound or cap:
            if bound:
                word, value, unit = bound.group(1), float(bound.group(2)), bound.group(3)
                direction_b = _bound_direction(word)
            else:
                value, unit = float(cap.group(1)), cap.group(2)
                direction_b = "max"
            constraints.append(
                Constraint(
                    metric=metric,
                    direction=direction_b,
                    bound=_to_si(value, unit),
                    sector=sector,
                    traffic_class=traffic_class,
                )
            )
            # "reduce X below B" carries an optimization target on top of
            # the bound; "ensure X stays below B" is a bare guard
            if action_verb and bound:
                objectives.append(
                    Objective(metric, direction, sector, traffic_class)
                )
        else:
            objectives.append(
                Objective(metric, direction, sector, traffic_class)
            )

    if not any_metric_cue and not ambiguities:
        raise UnparseableIntentError("no recognizable metric in intent text")

    if ambiguities:
        return AmbiguityReport(raw_text=text, ambiguities=ambiguities)

    task_kind = None
    for pattern, kind in _TASK_CUES:
        if re.search(pattern, low):
            task_kind = kind
            break
    if task_kind is None:
        task_kind = "allocate" if objectives else "optimize"

    return StructuredIntent(
        task_kind=task_kind,
        objectives=objectives,
        constraints=constraints,
        raw_text=text,
    )


def resolve_ambiguity(
    report: AmbiguityReport, index: int, choice: str
) -> AmbiguityReport:
    """Record the operator's pick for one ambiguity; returns the report."""
    amb = report.ambiguities[index]
    if choice not in amb.candidates:
        raise ValueError(f"choice {choice!r} not among candidates {amb.candidates}")
    amb.resolution = choice
    return report


def finalize_intent(
    report: AmbiguityReport, context: Optional[ParserContext] = None
):
    """Re-parse with all resolutions substituted into the text."""
    if report.unresolved():
        raise ValueError("ambiguities remain unresolved")
    text = report.raw_text
    for amb in report.ambiguities:
        if amb.field_name == "metric":
            text += f". Target metric: {amb.resolution}."
        elif amb.field_name == "sector":
            text += f" in sector {amb.resolution}"
    intent = parse_intent(text, context)
    if isinstance(intent, AmbiguityReport):
        # resolutions answered every question; a fresh report means the
        # grammar found a new hole, surface it
        return intent
    return intent


def question_for(report: AmbiguityReport) -> ClarifyingQuestion:
    """Build the next clarifying question from the first open ambiguity."""
    open_ambs = report.unresolved()
    if not open_ambs:
        raise ValueError("nothing to clarify")
    amb = open_ambs[0]
    idx = report.ambiguities.index(amb)
    if amb.field_name == "metric":
        prompt = (
            "Should this target maximizing throughput or minimizing latency? "
            f"(context: {amb.context!r})"
        )
    else:
        prompt = f"Which sector does this refer to? (context: {amb.context!r})"
    return ClarifyingQuestion(prompt=prompt, options=list(amb.candidates), ambiguity_index=idx)
