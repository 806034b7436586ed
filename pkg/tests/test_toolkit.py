"""Tool registry: the side-effect gate, audit totality, read-only purity."""

import pytest

from lawnet_copilot.runtime import NetworkRuntime
from lawnet_copilot.toolkit import (
    ToolRegistry,
    ToolSpec,
    build_default_registry,
    validate_args,
    DuplicateToolError,
    UnknownToolError,
    SchemaViolationError,
    UnauthorizedSideEffectError,
)
from lawnet_copilot.copilot.protocol import (
    DialogueSession,
    ProtocolState,
    Plan,
    PlanStep,
    ToolCall,
)
from lawnet_copilot.sim.scenario import Scenario

from conftest import small_config


@pytest.fixture
def runtime():
    scen = Scenario(name="t", config=small_config(seed=41), n_slots=100)
    return NetworkRuntime(scen, load_corpus=False, snapshot_every=0)


@pytest.fixture
def registry(runtime):
    return build_default_registry(runtime)


def make_session(state=ProtocolState.IDLE) -> DialogueSession:
    s = DialogueSession("sess-test")
    s.state = state
    return s


def executing_session_with(call: ToolCall) -> DialogueSession:
    """Session correctly moved into EXECUTING around a one-step plan."""
    s = DialogueSession("sess-exec")
    plan = Plan(
        plan_id="plan-x",
        task_kind="allocate",
        steps=[
            PlanStep(
                stage_label="apply",
                rationale="r",
                evidence=["doc"],
                side_effecting=True,
                tool_call=call,
            )
        ],
    )
    s.current_plan = plan
    s.approved_plan_hash = plan.content_hash()
    plan.status = "executing"
    s.state = ProtocolState.EXECUTING
    return s


def test_register_and_list(registry):
    names = {t["name"] for t in registry.list_tools()}
    assert {
        "run_spectrum_analysis",
        "get_kpi_report",
        "fetch_event_logs",
        "deploy_network_slice",
        "update_ran_parameters",
        "run_traffic_forecast",
        "simulate_beamforming_pattern",
        "set_flight_altitude",
    } <= names


def test_duplicate_registration_rejected(registry):
    with pytest.raises(DuplicateToolError):
        registry.register_tool(
            ToolSpec("get_kpi_report", {"required": []}, False, "dup", lambda a: None)
        )


def test_schema_invalid_spec_rejected(runtime):
    reg = ToolRegistry(runtime)
    with pytest.raises(SchemaViolationError):
        reg.register_tool(ToolSpec("bad", "not-a-schema", False, "x", lambda a: None))


def test_unknown_tool(registry):
    with pytest.raises(UnknownToolError):
        registry.invoke(make_session(), ToolCall(tool="nope", args={}))


def test_args_validation():
    schema = {"required": ["a"], "properties": {"a": "string", "b": "integer"}}
    validate_args(schema, {"a": "x", "b": 1})
    with pytest.raises(SchemaViolationError):
        validate_args(schema, {"b": 1})
    with pytest.raises(SchemaViolationError):
        validate_args(schema, {"a": "x", "b": "one"})
    with pytest.raises(SchemaViolationError):
        validate_args(schema, {"a": "x", "z": 3})


def test_read_only_allowed_during_planning(runtime, registry):
    runtime.advance_slots(5)
    session = make_session(ProtocolState.PLANNING)
    result = registry.invoke(
        session,
        ToolCall(tool="get_kpi_report", args={"slice_id": "all", "time_window": 5}),
    )
    assert result.status == "ok"
    assert result.slot_stamp == runtime.clock_slot
    # aggregates match trace recomputation
    served = sum(u.served_bits for r in runtime.trace for u in r.users)
    total = sum(
        c["mean_throughput_bps"] for c in result.payload["classes"].values()
    ) * (5 * runtime.scenario.config.slot_duration_s)
    assert total == pytest.approx(served)


def test_side_effect_blocked_outside_executing(runtime, registry):
    for state in (
        ProtocolState.IDLE,
        ProtocolState.PLANNING,
        ProtocolState.PLAN_PROPOSED,
        ProtocolState.APPROVED,
        ProtocolState.REPORTING,
    ):
        session = make_session(state)
        call = ToolCall(
            tool="update_ran_parameters",
            args={"gnodeb_id": "uav-0", "params": {"tx_power_dbm": 33.0}},
            call_id="c1",
        )
        with pytest.raises(UnauthorizedSideEffectError):
            registry.invoke(session, call)
    assert runtime.command_queue == []


def test_side_effect_requires_call_in_plan(runtime, registry):
    planned = ToolCall(
        tool="set_flight_altitude",
        args={"uav_id": "uav-0", "delta_m": 50.0},
        call_id="planned-call",
    )
    session = executing_session_with(planned)
    rogue = ToolCall(
        tool="set_flight_altitude",
        args={"uav_id": "uav-0", "delta_m": 50.0},
        call_id="rogue-call",
    )
    with pytest.raises(UnauthorizedSideEffectError):
        registry.invoke(session, rogue)
    result = registry.invoke(session, planned)
    assert result.status == "ok"
    assert len(runtime.command_queue) == 1


def test_side_effect_requires_matching_hash(runtime, registry):
    call = ToolCall(
        tool="set_flight_altitude",
        args={"uav_id": "uav-0", "delta_m": 10.0},
        call_id="c-hash",
    )
    session = executing_session_with(call)
    session.approved_plan_hash = "0" * 64  # stale approval
    with pytest.raises(UnauthorizedSideEffectError):
        registry.invoke(session, call)


def test_altitude_applies_next_slot(runtime, registry):
    call = ToolCall(
        tool="set_flight_altitude",
        args={"uav_id": "uav-0", "delta_m": 50.0},
        call_id="c-alt",
    )
    session = executing_session_with(call)
    before = runtime.world.uav("uav-0").altitude_m
    registry.invoke(session, call)
    assert runtime.world.uav("uav-0").altitude_m == before  # queued, not applied
    runtime.advance_slot()
    assert runtime.world.uav("uav-0").altitude_m == before + 50.0


def test_audit_totality(runtime, registry):
    session = make_session(ProtocolState.PLANNING)
    runtime.advance_slots(2)
    calls = [
        ToolCall(tool="get_kpi_report", args={"slice_id": "all"}, call_id="a"),
        ToolCall(tool="nope", args={}, call_id="b"),
        ToolCall(
            tool="update_ran_parameters",
            args={"gnodeb_id": "uav-0", "params": {"tx_power_dbm": 31.0}},
            call_id="c",
        ),
        ToolCall(tool="fetch_event_logs", args={"node_id": "uav-9"}, call_id="d"),
    ]
    for call in calls:
        try:
            registry.invoke(session, call)
        except (UnknownToolError, UnauthorizedSideEffectError):
            pass
    assert [r["call_id"] for r in registry.invocation_log] == ["a", "b", "c", "d"]
    audit_kinds = [e.payload["call_id"] for e in session.audit_log if e.kind == "tool_invocation"]
    assert audit_kinds == ["a", "b", "c", "d"]


def test_read_only_tools_leave_world_unchanged(runtime, registry):
    runtime.advance_slots(3)
    session = make_session(ProtocolState.PLANNING)
    before = runtime.world.serialize()
    for tool, args in [
        ("get_kpi_report", {"slice_id": "all", "time_window": 3}),
        ("run_spectrum_analysis", {"location": "uav-0"}),
        ("fetch_event_logs", {"node_id": "uav-0"}),
        ("run_traffic_forecast", {"area": "all"}),
        (
            "simulate_beamforming_pattern",
            {"config": {"uav_id": "uav-0", "gain_delta_db": 3.0, "horizon_slots": 5}},
        ),
    ]:
        result = registry.invoke(session, ToolCall(tool=tool, args=args, call_id=tool))
        assert result.status == "ok", f"{tool}: {result.error}"
    assert runtime.world.serialize() == before
    assert runtime.command_queue == []


def test_handler_errors_surface_as_error_results(runtime, registry):
    session = make_session(ProtocolState.PLANNING)
    result = registry.invoke(
        session, ToolCall(tool="fetch_event_logs", args={"node_id": "uav-77"}, call_id="x")
    )
    assert result.status == "error"
    assert "uav-77" in result.error
