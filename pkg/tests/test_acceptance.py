"""Acceptance criteria, one test per criterion, at the stated tolerances.

Run with -v (or -s for the summary prints); every criterion reports one
PASS/FAIL line. The heavyweight fixtures (the 30-run scheme grid and the
closed-loop demo) are module-scoped and shared by the criteria that read
them.
"""

import json
import math
import random
import time

import numpy as np
import pytest

from lawnet_copilot.sim import (
    ChannelParams,
    EnergyParams,
    MobilityParams,
    SPEED_OF_LIGHT,
    path_loss,
    propulsion_power,
    gauss_markov_step,
)
from lawnet_copilot.sim.scenario import load_scenario, builtin_scenario_path
from lawnet_copilot.runner import (
    run_experiment,
    run_closed_loop_demo,
    replay_audit,
    metrics_csv_text,
    write_audit_bundle,
)

BUDGETS_S = {
    1: 1.0,
    2: 1.0,
    3: 5.0,
    4: 30.0,
    5: 300.0,
    6: 60.0,
    7: 60.0,
    8: 60.0,
    9: 120.0,
    10: 60.0,
}


def report(criterion: int, ok: bool, detail: str, elapsed: float):
    line = (
        f"ACCEPTANCE {criterion:02d}: {'PASS' if ok else 'FAIL'} "
        f"({elapsed:.1f}s <= {BUDGETS_S[criterion]:.0f}s) - {detail}"
    )
    print(line)
    assert ok, line
    assert elapsed <= BUDGETS_S[criterion], f"criterion {criterion} over time budget: {line}"


# ----------------------------------------------------------- shared fixtures


@pytest.fixture(scope="module")
def scheme_grid():
    scenario = load_scenario(builtin_scenario_path("seismic_response.json"))
    t0 = time.time()
    results = run_experiment(
        scenario, ["intent_weighted_pf", "round_robin", "max_sinr"], list(range(10))
    )
    return results, time.time() - t0


@pytest.fixture(scope="module")
def closed_loop(tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("closed_loop")
    scenario = load_scenario(builtin_scenario_path("smoke_recovery.json"))
    t0 = time.time()
    outcome = run_closed_loop_demo(scenario, seed=2, out_dir=out_dir)
    outcome["elapsed"] = time.time() - t0
    outcome["out_dir"] = out_dir
    return outcome


# ----------------------------------------------------------------- criteria


def test_criterion_01_channel_math():
    t0 = time.time()
    params = ChannelParams()
    ok = True
    details = []
    for los, expected in ((True, 6.3216), (False, 10.536)):
        exponent = 2.1 if los else 3.5
        for d in (1.0, 7.5, 50.0, 313.0):
            delta = path_loss(2 * d, los, params) - path_loss(d, los, params)
            ok &= abs(delta - 10.0 * exponent * math.log10(2.0)) < 1e-9
        value = 10.0 * exponent * math.log10(2.0)
        ok &= abs(value - expected) < 5e-5
        details.append(f"{'LoS' if los else 'NLoS'} slope {value:.4f} dB")
    friis = 20.0 * math.log10(4.0 * math.pi * 28e9 / SPEED_OF_LIGHT)
    pl1 = path_loss(1.0, True, params)
    ok &= abs(pl1 - friis) < 0.1
    details.append(f"PL(1m)={pl1:.3f} vs Friis {friis:.3f}")
    report(1, ok, "; ".join(details), time.time() - t0)


def test_criterion_02_energy_math():
    t0 = time.time()
    params = EnergyParams()
    hover = propulsion_power(0.0, params)
    ok = hover == pytest.approx(168.4, abs=1e-12)
    speeds = np.arange(0.0, 30.0 + 1e-9, 0.01)
    powers = [propulsion_power(float(v), params) for v in speeds]
    i_min = int(np.argmin(powers))
    interior = 0 < i_min < len(speeds) - 1 and powers[i_min] < hover
    ok &= interior
    report(
        2,
        ok,
        f"hover {hover:.1f} W; min {powers[i_min]:.2f} W at {speeds[i_min]:.2f} m/s",
        time.time() - t0,
    )


def test_criterion_03_mobility_stationarity():
    t0 = time.time()
    params = MobilityParams(memory_alpha=0.85, mean_speed_mps=1.5, speed_sigma=0.5)
    rng = np.random.default_rng(20240817)
    speed, heading = params.mean_speed_mps, 0.0
    total = 0.0
    n = 100_000
    for _ in range(n):
        speed, heading = gauss_markov_step(speed, heading, params, rng)
        total += speed
    mean = total / n
    rel = abs(mean - params.mean_speed_mps) / params.mean_speed_mps
    report(3, rel < 0.05, f"mean speed {mean:.4f} vs 1.5 ({rel*100:.2f}% off)", time.time() - t0)


def test_criterion_04_metric_oracles():
    from lawnet_copilot.metrics import compute_isr, compute_ee, latency_stats, QosConstraint
    from test_metrics import _random_trace, _oracle_isr

    t0 = time.time()
    rng = random.Random(990)
    pool = [
        QosConstraint("latency", 0.001, "max", traffic_class="sar_urllc"),
        QosConstraint("throughput", 5e6, "min", traffic_class="medical_video"),
        QosConstraint("reliability", 0.7, "min", traffic_class="sar_urllc"),
        QosConstraint("endurance", 1800.0, "min"),
    ]
    exact = 0
    for _ in range(1000):
        trace = _random_trace(rng, n_slots=rng.randrange(1, 10), n_users=6)
        constraints = rng.sample(pool, k=rng.randrange(1, 4))
        # ISR / EE exact
        assert compute_isr(trace, constraints, 0.01) == _oracle_isr(trace, constraints, 0.01)
        bits = sum(u.served_bits for r in trace for u in r.users)
        energy = sum(v.propulsion_j + v.tx_j for r in trace for v in r.uavs)
        assert compute_ee(trace) == (bits / 1e6) / energy
        # latency stats to 1e-9 relative
        mean, p95, viol = latency_stats(trace, "medical_video", 0.002)
        samples = sorted(
            u.latency_s
            for r in trace
            for u in r.users
            if u.group == "medical_video"
            and (u.generated_bits + u.served_bits + u.queue_bits) > 0
        )
        if samples:
            assert mean == pytest.approx(sum(samples) / len(samples), rel=1e-9)
            rank = max(1, math.ceil(0.95 * len(samples)))
            assert p95 == pytest.approx(samples[rank - 1], rel=1e-9)
            assert viol == pytest.approx(
                sum(1 for x in samples if x > 0.002) / len(samples), rel=1e-9
            )
        exact += 1
    report(4, exact == 1000, f"{exact}/1000 random traces match the oracles", time.time() - t0)


def test_criterion_05_allocator_ordering(scheme_grid):
    results, elapsed = scheme_grid
    by = {}
    for r in results:
        by.setdefault(r.scheme, {})[r.seed] = r.isr
    wins = 0
    rows = []
    for seed in range(10):
        pf = by["intent_weighted_pf"][seed]
        rr = by["round_robin"][seed]
        ms = by["max_sinr"][seed]
        good = pf >= rr + 0.05 and pf >= ms + 0.05
        wins += good
        rows.append(f"s{seed}: {pf:.3f}/{rr:.3f}/{ms:.3f}")
    report(5, wins >= 9, f"{wins}/10 seeds ordered (pf/rr/max_sinr): " + " ".join(rows), elapsed)


def test_criterion_06_hitl_gate_fuzz():
    from lawnet_copilot.sim.scenario import Scenario
    from lawnet_copilot.runtime import NetworkRuntime
    from lawnet_copilot.toolkit import build_default_registry, UnauthorizedSideEffectError, SchemaViolationError, UnknownToolError
    from lawnet_copilot.copilot.protocol import (
        DialogueSession,
        ProtocolState,
        Plan,
        PlanStep,
        ToolCall,
    )
    from conftest import small_config

    t0 = time.time()
    scenario = Scenario(name="fuzz", config=small_config(seed=404), n_slots=10)
    runtime = NetworkRuntime(scenario, load_corpus=False, snapshot_every=0)
    runtime.advance_slots(3)
    registry = build_default_registry(runtime)
    side_tools = ["set_flight_altitude", "update_ran_parameters", "deploy_network_slice"]
    rng = random.Random(20250808)
    states = list(ProtocolState)

    violations = 0
    executed_ok = 0
    n = 100_000
    for i in range(n):
        session = DialogueSession(f"fz-{i}")
        session.state = rng.choice(states)
        tool = rng.choice(side_tools)
        call = ToolCall(
            tool=tool,
            args={
                "set_flight_altitude": {"uav_id": "uav-0", "delta_m": 5.0},
                "update_ran_parameters": {
                    "gnodeb_id": "uav-0",
                    "params": {"tx_power_dbm": 31.0},
                },
                "deploy_network_slice": {"config_json": {"name": "z"}},
            }[tool],
            call_id=f"c-{i}",
        )
        # randomize every gate ingredient independently
        if rng.random() < 0.7:
            plan = Plan(
                plan_id=f"p-{i}",
                task_kind="optimize",
                steps=[
                    PlanStep(
                        stage_label="s",
                        rationale="r",
                        evidence=["e"],
                        side_effecting=True,
                        tool_call=call if rng.random() < 0.6 else ToolCall(tool=tool, args=call.args, call_id="other"),
                    )
                ],
            )
            plan.status = rng.choice(["proposed", "approved", "executing", "done"])
            session.current_plan = plan
            session.approved_plan_hash = (
                plan.content_hash() if rng.random() < 0.6 else "deadbeef" * 8
            )
        authorized = (
            session.state == ProtocolState.EXECUTING
            and session.current_plan is not None
            and session.current_plan.status == "executing"
            and session.approved_plan_hash == session.current_plan.content_hash()
            and any(
                s.tool_call is not None and s.tool_call.call_id == call.call_id
                for s in session.current_plan.steps
            )
        )
        before_queue = len(runtime.command_queue)
        try:
            result = registry.invoke(session, call)
            ran = result.status == "ok"
        except UnauthorizedSideEffectError:
            ran = False
            if authorized:
                violations += 1  # should have been allowed
        except (SchemaViolationError, UnknownToolError):
            ran = False
        if ran:
            executed_ok += 1
            if not authorized:
                violations += 1
        elif not authorized and len(runtime.command_queue) != before_queue:
            violations += 1  # a blocked call must leave no side effect
        runtime.command_queue.clear()
        runtime.set_weights(runtime.weights)  # no-op, keeps weights object stable

    ok = violations == 0
    report(
        6,
        ok,
        f"{n} fuzzed call sequences, {executed_ok} authorized executions, {violations} gate violations",
        time.time() - t0,
    )


def test_criterion_07_closed_loop_smoke(closed_loop):
    out = closed_loop
    ok = (
        out["diagnosis_root_cause"] == "atmospheric_attenuation"
        and out["proposed_tool"] == "set_flight_altitude"
        and float(out["proposed_args"]["delta_m"]) == 50.0
        and out["execution_status"] == "completed"
        and out["recovered"]
        and (out["recovered_at_slot_offset"] or 10**9) <= 200
    )
    detail = (
        f"cause={out['diagnosis_root_cause']}, action={out['proposed_tool']}"
        f"(+{out['proposed_args'].get('delta_m')} m), pre={out['pre_event_bps']/1e6:.0f} Mbps, "
        f"post={out['post_bps']/1e6:.0f} Mbps "
        f"({100*out['post_bps']/out['pre_event_bps']:.0f}% of pre-event), "
        f"recovered at +{out['recovered_at_slot_offset']} slots"
    )
    report(7, ok, detail, out["elapsed"])


def test_criterion_08_endurance_constraint(closed_loop):
    t0 = time.time()
    session = closed_loop["session"]
    floor = 1800.0
    executed_plans = {
        e.payload["plan_id"]
        for e in session.audit_log
        if e.kind == "execution_started"
    }
    checks = {}
    for e in session.audit_log:
        if e.kind == "endurance_check":
            checks[e.payload["plan_id"]] = e.payload
    ok = bool(executed_plans)
    details = []
    for plan_id in sorted(executed_plans):
        check = checks.get(plan_id)
        good = check is not None and check["passed"] and check["fleet_endurance_s"] >= floor
        ok &= good
        details.append(
            f"{plan_id}: {check['fleet_endurance_s']:.0f}s" if check else f"{plan_id}: MISSING"
        )
    report(
        8,
        ok,
        f"{len(executed_plans)} executed plans all cleared the {floor:.0f} s floor: "
        + ", ".join(details),
        time.time() - t0,
    )


def test_criterion_09_determinism_and_replay(tmp_path):
    scenario = load_scenario(builtin_scenario_path("smoke_recovery.json"))
    t0 = time.time()
    a = run_experiment(scenario, ["copilot"], [0], out_dir=tmp_path / "a", n_slots=400)
    b = run_experiment(scenario, ["copilot"], [0], out_dir=tmp_path / "b", n_slots=400)
    csv_a = (tmp_path / "a" / "metrics.csv").read_bytes()
    csv_b = (tmp_path / "b" / "metrics.csv").read_bytes()
    identical = csv_a == csv_b and metrics_csv_text(a) == metrics_csv_text(b)
    outcome = replay_audit(tmp_path / "a" / "audit_copilot_0.json")
    ok = identical and outcome["match"]
    report(
        9,
        ok,
        f"metrics.csv byte-identical ({len(csv_a)} bytes); audit replay reproduced "
        f"{len(outcome['replayed_reports'])} execution report(s)",
        time.time() - t0,
    )


def test_criterion_10_grounding(closed_loop, tmp_path):
    t0 = time.time()
    copilot = closed_loop["copilot"]
    kb = copilot.runtime.kb
    registry = copilot.registry
    plans = []
    for session in copilot.sessions.values():
        plans.extend(session.past_plans)
        if session.current_plan is not None:
            plans.append(session.current_plan)
    total_steps = 0
    grounded = 0
    for plan in plans:
        for step in plan.steps:
            total_steps += 1
            if not step.evidence:
                continue
            if all(
                kb.get(ref) is not None or registry.result_by_id(ref) is not None
                for ref in step.evidence
            ):
                grounded += 1
    ok = total_steps > 0 and grounded == total_steps
    report(
        10,
        ok,
        f"{grounded}/{total_steps} plan steps across {len(plans)} plans carry resolvable evidence",
        time.time() - t0,
    )
