// @vitest-environment jsdom
import { beforeEach, describe, expect, it } from "vitest";

import { ConsoleStore } from "../src/store";
import {
  Handlers,
  renderKpis,
  renderMap,
  renderPlanPanel,
  renderSessionPanel,
} from "../src/render";
import type { Plan, StreamEvent, WorldSnapshot } from "../src/types";

function handlers(): Handlers & { calls: string[] } {
  const calls: string[] = [];
  return {
    calls,
    onSubmitIntent: (t) => calls.push(`intent:${t}`),
    onAnswer: (c) => calls.push(`answer:${c}`),
    onVerdict: (v, t) => calls.push(`verdict:${v}:${t ?? ""}`),
    onProposePlan: () => calls.push("propose"),
    onSimControl: (a) => calls.push(`sim:${a}`),
    onEvidenceClick: (r) => calls.push(`evidence:${r}`),
  };
}

const plan: Plan = {
  plan_id: "plan-0007",
  task_kind: "optimize",
  steps: [
    {
      stage_label: "candidate_evaluation",
      rationale: "compare remediations",
      evidence: ["whatif-plan-0007", "doc-mmwave-particulates"],
      tool_call: null,
      side_effecting: false,
      result: null,
    },
    {
      stage_label: "apply_remediation",
      rationale: "climb above the plume",
      evidence: ["whatif-plan-0007"],
      tool_call: {
        tool: "set_flight_altitude",
        args: { uav_id: "uav-2", delta_m: 50 },
        call_id: "plan-0007-remediate",
      },
      side_effecting: true,
      result: null,
    },
  ],
  checkpoints: [0],
  status: "proposed",
  hash: "abc",
};

function world(): WorldSnapshot {
  return {
    clock_slot: 42,
    paused: true,
    slot_duration_s: 0.01,
    area_side_m: 500,
    sectors: [{ name: "B", x_min: 340, y_min: 340, x_max: 370, y_max: 370 }],
    uavs: [
      {
        id: "uav-2",
        x: 350,
        y: 350,
        altitude_m: 150,
        battery_j: 300000,
        tx_power_dbm: 30,
        role: "access",
        operational: true,
      },
    ],
    users: [
      {
        id: "u-010",
        x: 352,
        y: 348,
        group: "medical_video",
        sector: "B",
        serving_uav: "uav-2",
        queue_bits: 0,
      },
    ],
    links: [
      {
        uav_id: "uav-2",
        user_id: "u-010",
        path_loss_db: 104,
        excess_attenuation_db: 15,
        los: true,
      },
    ],
    active_events: [
      {
        event_id: "ev-000",
        kind: "excess_attenuation",
        target: "uav-2",
        magnitude: 15,
        start_slot: 10,
        end_slot: 10_000,
        ceiling_m: 120,
      },
    ],
  };
}

let root: HTMLElement;
beforeEach(() => {
  document.body.innerHTML = "<div id='r'></div>";
  root = document.getElementById("r")!;
});

describe("plan panel", () => {
  it("disables verdict controls outside PLAN_PROPOSED", () => {
    const store = new ConsoleStore();
    store.applyPlan(plan);
    store.applySessionState("EXECUTING");
    renderPlanPanel(root, store, handlers());
    const approve = root.querySelector<HTMLButtonElement>("[data-testid=verdict-approve]")!;
    expect(approve.disabled).toBe(true);
  });

  it("enables verdicts when proposed and emits the chosen verdict", () => {
    const store = new ConsoleStore();
    store.applyPlan(plan);
    store.applySessionState("PLAN_PROPOSED");
    const h = handlers();
    renderPlanPanel(root, store, h);
    const approve = root.querySelector<HTMLButtonElement>("[data-testid=verdict-approve]")!;
    expect(approve.disabled).toBe(false);
    approve.click();
    expect(h.calls).toContain("verdict:approve:");
  });

  it("marks checkpoints and side effects, links evidence", () => {
    const store = new ConsoleStore();
    store.applyPlan(plan);
    store.applySessionState("PLAN_PROPOSED");
    const h = handlers();
    renderPlanPanel(root, store, h);
    expect(root.querySelector("[data-testid=plan-step-0]")!.className).toContain("checkpoint");
    expect(root.querySelectorAll(".badge.warn").length).toBe(1);
    const link = root.querySelector<HTMLAnchorElement>("[data-ref=doc-mmwave-particulates]")!;
    link.click();
    expect(h.calls).toContain("evidence:doc-mmwave-particulates");
  });

  it("modify opens the amendment editor before sending", () => {
    const store = new ConsoleStore();
    store.applyPlan(plan);
    store.applySessionState("PLAN_PROPOSED");
    const h = handlers();
    renderPlanPanel(root, store, h);
    const modify = root.querySelector<HTMLButtonElement>("[data-testid=verdict-modify]")!;
    const editor = root.querySelector<HTMLTextAreaElement>("[data-testid=amendment-input]")!;
    expect(editor.classList.contains("hidden")).toBe(true);
    modify.click();
    expect(editor.classList.contains("hidden")).toBe(false);
    expect(h.calls.filter((c) => c.startsWith("verdict:modify"))).toHaveLength(0);
    editor.value = "also cap civilian throughput at 10 mbps";
    modify.click();
    expect(h.calls).toContain("verdict:modify:also cap civilian throughput at 10 mbps");
  });
});

describe("session panel", () => {
  it("blocks empty intent submission client-side", () => {
    const store = new ConsoleStore();
    const h = handlers();
    renderSessionPanel(root, store, h);
    const submit = root.querySelector<HTMLButtonElement>("[data-testid=intent-submit]")!;
    expect(submit.disabled).toBe(true);
    submit.click();
    expect(h.calls).toHaveLength(0);
    const input = root.querySelector<HTMLTextAreaElement>("[data-testid=intent-input]")!;
    input.value = "reduce latency below 1 ms for slice urllc-a";
    input.dispatchEvent(new Event("input"));
    expect(submit.disabled).toBe(false);
    submit.click();
    expect(h.calls).toContain("intent:reduce latency below 1 ms for slice urllc-a");
  });

  it("renders clarifying question options as choices", () => {
    const store = new ConsoleStore();
    store.applyQuestion({
      prompt: "Throughput or latency?",
      options: ["throughput", "latency"],
      ambiguity_index: 0,
    });
    const h = handlers();
    renderSessionPanel(root, store, h);
    const option = root.querySelector<HTMLButtonElement>("[data-option=latency]")!;
    option.click();
    expect(h.calls).toContain("answer:latency");
  });
});

describe("map view", () => {
  it("renders uav altitude, link quality coloring, sector and event badge", () => {
    const store = new ConsoleStore();
    store.applyWorld(world());
    renderMap(root, store);
    const uav = root.querySelector("[data-uav=uav-2]")!;
    expect(uav.getAttribute("data-altitude")).toBe("150");
    expect(uav.querySelector(".event-ring")).not.toBeNull();
    const link = root.querySelector("[data-link='uav-2:u-010']")!;
    expect(link.getAttribute("class")).toContain("link-fair"); // 104 + 15 dB
    expect(root.querySelector("[data-sector=B]")).not.toBeNull();
    expect(root.querySelector("[data-testid=event-badges]")!.textContent).toContain(
      "excess_attenuation on uav-2",
    );
    expect(root.querySelector("[data-testid=clock]")!.textContent).toContain("slot 42");
  });
});

describe("kpi view", () => {
  it("charts grow as stream events arrive", () => {
    const store = new ConsoleStore();
    const mk = (slot: number): StreamEvent => ({
      report: { slot },
      world: world(),
      kpis: {
        slot,
        satisfied: true,
        classes: {
          medical_video: { throughput_mbps: 90, mean_latency_ms: 2, n_users: 6 },
        },
        fleet_endurance_s: 2100,
        ee_mbit_per_joule: 2.4,
      },
    });
    store.applyStreamEvent(mk(1));
    renderKpis(root, store);
    const points1 = root
      .querySelector("[data-kpi-class=medical_video] svg")!
      .getAttribute("data-points");
    store.applyStreamEvent(mk(2));
    store.applyStreamEvent(mk(3));
    renderKpis(root, store);
    const points2 = root
      .querySelector("[data-kpi-class=medical_video] svg")!
      .getAttribute("data-points");
    expect(Number(points2)).toBeGreaterThan(Number(points1));
    expect(root.querySelector("[data-testid=kpi-isr]")!.textContent).toContain("100.0%");
  });
});
