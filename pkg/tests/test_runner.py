"""Experiment driver: determinism, exports, audit replay, CLI wiring."""

import json
from pathlib import Path

import pytest

from lawnet_copilot.sim.scenario import Scenario, load_scenario, save_scenario, ScenarioInvalidError
from lawnet_copilot.runner import (
    run_experiment,
    run_single,
    run_closed_loop_demo,
    replay_audit,
    read_trace,
    metrics_csv_text,
    write_audit_bundle,
    ScriptedOperator,
    scenario_constraints,
)
from lawnet_copilot.cli import main as cli_main

from conftest import small_config

DEMO_INTENT = (
    "Prioritize URLLC links for SAR robots in Sector A and maximize video "
    "throughput for medical teams in Sector B, while ensuring the UAV fleet's "
    "average battery life exceeds 30 minutes"
)


def tiny_scenario(seed=0, n_slots=60) -> Scenario:
    return Scenario(
        name="tiny",
        config=small_config(seed=seed),
        intent_text=DEMO_INTENT,
        n_slots=n_slots,
        weights={
            "class_priority": {"A/sar_urllc": 8.0, "B/medical_video": 5.0},
            "latency_budget_s": {"sar_urllc": 0.001},
            "min_rate_bps": {"medical_video": 1e6},
            "endurance_floor_s": 1800.0,
        },
    )


def test_single_row_table(tmp_path):
    results = run_experiment(tiny_scenario(), ["round_robin"], [3], out_dir=tmp_path)
    assert len(results) == 1
    assert results[0].scheme == "round_robin"
    assert results[0].seed == 3
    assert (tmp_path / "metrics.csv").exists()
    assert (tmp_path / "plot_data.csv").exists()
    trace = read_trace(tmp_path / "trace_round_robin_3.ndjson")
    assert len(trace) == 60


def test_run_twice_identical_csv(tmp_path):
    a = run_experiment(tiny_scenario(), ["round_robin", "intent_weighted_pf"], [0, 1])
    b = run_experiment(tiny_scenario(), ["round_robin", "intent_weighted_pf"], [0, 1])
    assert metrics_csv_text(a) == metrics_csv_text(b)


def test_seed_isolation():
    base = run_experiment(tiny_scenario(), ["round_robin"], [0, 1])
    again = run_experiment(tiny_scenario(), ["round_robin"], [0, 2])
    assert base[0].to_row() == again[0].to_row()
    assert base[1].to_row() != again[1].to_row()


def test_unknown_scheme_rejected():
    with pytest.raises(ScenarioInvalidError):
        run_experiment(tiny_scenario(), ["mystery"], [0])


def test_copilot_scheme_runs_dialogue(tmp_path):
    results = run_experiment(
        tiny_scenario(), ["copilot"], [0], out_dir=tmp_path, n_slots=40
    )
    assert len(results) == 1
    bundle = json.loads((tmp_path / "audit_copilot_0.json").read_text())
    kinds = [
        e["kind"]
        for sess in bundle["sessions"].values()
        for e in sess["audit_log"]
    ]
    assert "intent_submitted" in kinds
    assert "plan_proposed" in kinds
    assert "verdict" in kinds
    assert "execution_report" in kinds


def test_metric_recomputable_from_trace(tmp_path):
    scenario = tiny_scenario()
    results = run_experiment(scenario, ["intent_weighted_pf"], [5], out_dir=tmp_path)
    from lawnet_copilot.metrics import metrics_for_trace

    trace = read_trace(tmp_path / "trace_intent_weighted_pf_5.ndjson")
    recomputed = metrics_for_trace(
        trace,
        scenario_constraints(scenario),
        "intent_weighted_pf",
        5,
        scenario.config.slot_duration_s,
        {"sar_urllc": 0.001},
    )
    assert recomputed.isr == results[0].isr
    assert recomputed.ee_mbit_per_joule == pytest.approx(
        results[0].ee_mbit_per_joule, rel=1e-12
    )


def test_audit_replay_matches(tmp_path):
    scenario = tiny_scenario(n_slots=40)
    run_experiment(scenario, ["copilot"], [0], out_dir=tmp_path, n_slots=40)
    outcome = replay_audit(tmp_path / "audit_copilot_0.json")
    assert outcome["match"], outcome
    assert outcome["original_reports"]


def test_closed_loop_demo_audit_replay(tmp_path):
    from lawnet_copilot.sim.scenario import builtin_scenario_path

    scenario = load_scenario(builtin_scenario_path("smoke_recovery.json"))
    out = run_closed_loop_demo(scenario, seed=2, out_dir=tmp_path)
    assert out["recovered"]
    outcome = replay_audit(tmp_path / "audit_closed_loop_2.json")
    assert outcome["match"], outcome


def test_scripted_operator_from_file(tmp_path):
    f = tmp_path / "op.json"
    f.write_text(json.dumps({"answers": ["latency"], "verdicts": ["approve", "approve"]}))
    op = ScriptedOperator.from_file(f)
    assert op.next_answer(["throughput", "latency"]) == "latency"
    assert op.next_verdict() == "approve"
    assert op.next_verdict() == "approve"
    assert op.next_verdict() == "approve"  # falls back to approve


def test_cli_run_and_report(tmp_path):
    scen_path = tmp_path / "scen.json"
    save_scenario(tiny_scenario(n_slots=30), scen_path)
    out_dir = tmp_path / "out"
    rc = cli_main(
        [
            "run",
            "--scenario",
            str(scen_path),
            "--schemes",
            "round_robin",
            "--seeds",
            "0..1",
            "--out",
            str(out_dir),
            "--slots",
            "30",
        ]
    )
    assert rc == 0
    assert (out_dir / "metrics.csv").exists()
    assert (out_dir / "isr_by_scheme.png").exists()
    rc = cli_main(
        ["report", "--metrics", str(out_dir / "metrics.csv"), "--out", str(out_dir)]
    )
    assert rc == 0
    assert (out_dir / "ee_by_scheme.png").exists()


def test_cli_seed_parsing():
    from lawnet_copilot.cli import _parse_seeds

    assert _parse_seeds("0..3") == [0, 1, 2, 3]
    assert _parse_seeds("1,5,7") == [1, 5, 7]
    assert _parse_seeds("4") == [4]


def test_scenario_roundtrip(tmp_path):
    scenario = tiny_scenario()
    path = tmp_path / "s.json"
    save_scenario(scenario, path)
    loaded = load_scenario(path)
    assert loaded.to_dict() == scenario.to_dict()


def test_scenario_invalid_reports_reason(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"name": "x", "config": {"n_uavs": 0}}))
    with pytest.raises(ScenarioInvalidError):
        load_scenario(path)
