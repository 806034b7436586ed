"""Intent grammar: the three canonical texts plus elicitation mechanics."""

import pytest

from lawnet_copilot.copilot.intent import (
    parse_intent,
    finalize_intent,
    resolve_ambiguity,
    question_for,
    AmbiguityReport,
    StructuredIntent,
    ParserContext,
    UnparseableIntentError,
)

CTX = ParserContext(sectors=["A", "B"])

DEMO_INTENT = (
    "Prioritize URLLC links for SAR robots in Sector A and maximize video "
    "throughput for medical teams in Sector B, while ensuring the UAV fleet's "
    "average battery life exceeds 30 minutes"
)


def test_demo_intent_parses_fully():
    intent = parse_intent(DEMO_INTENT, CTX)
    assert isinstance(intent, StructuredIntent)
    objs = {(o.metric, o.direction, o.sector, o.traffic_class) for o in intent.objectives}
    assert ("latency", "minimize", "A", "sar_urllc") in objs
    assert ("throughput", "maximize", "B", "medical_video") in objs
    cons = [(c.metric, c.direction, c.bound, c.traffic_class) for c in intent.constraints]
    assert ("endurance", "min", 1800.0, None) in cons
    assert intent.task_kind == "allocate"


def test_vague_text_yields_metric_ambiguity():
    report = parse_intent("Improve performance in the downtown core", CTX)
    assert isinstance(report, AmbiguityReport)
    fields = {a.field_name for a in report.ambiguities}
    assert "metric" in fields
    amb = next(a for a in report.ambiguities if a.field_name == "metric")
    assert set(amb.candidates) == {"throughput", "latency"}


def test_bounded_slice_intent_fully_specified():
    intent = parse_intent("Reduce latency below 1 ms for slice urllc-a", CTX)
    assert isinstance(intent, StructuredIntent)
    assert len(intent.constraints) == 1
    c = intent.constraints[0]
    assert (c.metric, c.direction, c.bound) == ("latency", "max", 0.001)
    assert c.traffic_class == "sar_urllc"
    assert any(o.metric == "latency" and o.direction == "minimize" for o in intent.objectives)


def test_no_metric_is_unparseable():
    with pytest.raises(UnparseableIntentError):
        parse_intent("Hello there, nice weather for flying", CTX)
    with pytest.raises(UnparseableIntentError):
        parse_intent("   ", CTX)


def test_unknown_sector_lists_candidates():
    report = parse_intent("Reduce latency in sector Q", CTX)
    assert isinstance(report, AmbiguityReport)
    amb = next(a for a in report.ambiguities if a.field_name == "sector")
    assert amb.candidates == ["A", "B"]


def test_elicitation_round_trip():
    report = parse_intent("Improve performance in the downtown core", CTX)
    q = question_for(report)
    assert set(q.options) == {"throughput", "latency"}
    resolve_ambiguity(report, q.ambiguity_index, "latency")
    assert not report.unresolved()
    final = finalize_intent(report, CTX)
    assert isinstance(final, StructuredIntent)
    assert any(o.metric == "latency" for o in final.objectives)


def test_bad_choice_rejected():
    report = parse_intent("Improve performance downtown", CTX)
    q = question_for(report)
    with pytest.raises(ValueError):
        resolve_ambiguity(report, q.ambiguity_index, "coverage")


def test_diagnose_task_kind():
    intent = parse_intent(
        "Diagnose the cause of high latency for URLLC slice users in the urban area",
        CTX,
    )
    assert isinstance(intent, StructuredIntent)
    assert intent.task_kind == "diagnose"


def test_units_parse_to_si():
    i1 = parse_intent("keep latency under 500 ms for civilians", CTX)
    assert i1.constraints[0].bound == pytest.approx(0.5)
    i2 = parse_intent("ensure throughput of at least 20 mbps for medical video", CTX)
    assert i2.constraints[0].bound == pytest.approx(20e6)
    assert i2.constraints[0].direction == "min"
