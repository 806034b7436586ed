// DOM + SVG rendering. Pure functions of the store: callers re-render on
// every state change; handlers are injected so this module stays passive.

import type { ConsoleStore } from "./store";
import { linkQuality } from "./store";
import type { PlanStep } from "./types";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface Handlers {
  onSubmitIntent(text: string): void;
  onAnswer(choice: string): void;
  onVerdict(verdict: "approve" | "reject" | "modify", text?: string): void;
  onProposePlan(): void;
  onSimControl(action: "start" | "pause" | "step"): void;
  onEvidenceClick(ref: string): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

// ------------------------------------------------------------ session panel

export function renderSessionPanel(
  root: HTMLElement,
  store: ConsoleStore,
  handlers: Handlers,
): void {
  root.replaceChildren();
  const head = el("div", { class: "panel-head" });
  head.append(
    el("span", { class: "title" }, "Operator session"),
    el(
      "span",
      { class: `state-badge state-${store.sessionState}`, "data-testid": "session-state" },
      store.sessionState,
    ),
  );
  root.append(head);

  const log = el("div", { class: "transcript", "data-testid": "transcript" });
  for (const turn of store.transcript) {
    log.append(el("div", { class: `turn turn-${turn.speaker}` }, `${turn.speaker}: ${turn.text}`));
  }
  root.append(log);

  if (store.question) {
    const q = el("div", { class: "question", "data-testid": "clarifying-question" });
    q.append(el("p", {}, store.question.prompt));
    for (const option of store.question.options) {
      const btn = el("button", { class: "option", "data-option": option }, option);
      btn.addEventListener("click", () => handlers.onAnswer(option));
      q.append(btn);
    }
    root.append(q);
  }

  const compose = el("div", { class: "compose" });
  const input = el("textarea", {
    class: "intent-input",
    "data-testid": "intent-input",
    placeholder: "State an operational intent...",
  });
  const submit = el(
    "button",
    { class: "primary", "data-testid": "intent-submit" },
    "Submit intent",
  );
  const refresh = () => {
    submit.disabled = !store.intentSubmittable(input.value);
  };
  input.addEventListener("input", refresh);
  submit.addEventListener("click", () => {
    if (store.intentSubmittable(input.value)) {
      handlers.onSubmitIntent(input.value.trim());
      input.value = "";
    }
  });
  refresh();
  compose.append(input, submit);
  if (store.sessionState === "PLANNING") {
    const plan = el(
      "button",
      { class: "primary", "data-testid": "propose-plan" },
      "Propose plan",
    );
    plan.addEventListener("click", () => handlers.onProposePlan());
    compose.append(plan);
  }
  root.append(compose);

  if (store.errorBanner) {
    root.append(el("div", { class: "error-banner", "data-testid": "error-banner" }, store.errorBanner));
  }
}

// --------------------------------------------------------------- plan panel

function stepNode(
  step: PlanStep,
  index: number,
  isCheckpoint: boolean,
  handlers: Handlers,
): HTMLElement {
  const node = el("div", {
    class: `plan-step${isCheckpoint ? " checkpoint" : ""}`,
    "data-testid": `plan-step-${index}`,
  });
  const head = el("div", { class: "step-head" });
  head.append(el("span", { class: "stage" }, `${index + 1}. ${step.stage_label}`));
  if (isCheckpoint) head.append(el("span", { class: "badge" }, "checkpoint"));
  if (step.side_effecting) head.append(el("span", { class: "badge warn" }, "side effect"));
  node.append(head);
  node.append(el("p", { class: "rationale" }, step.rationale));
  if (step.tool_call) {
    node.append(
      el(
        "code",
        { class: "tool-call" },
        `${step.tool_call.tool}(${JSON.stringify(step.tool_call.args)})`,
      ),
    );
  }
  if (step.evidence.length) {
    const ev = el("div", { class: "evidence" });
    ev.append(el("span", {}, "evidence: "));
    for (const ref of step.evidence) {
      const link = el("a", { href: "#", class: "evidence-link", "data-ref": ref }, ref);
      link.addEventListener("click", (e) => {
        e.preventDefault();
        handlers.onEvidenceClick(ref);
      });
      ev.append(link);
    }
    node.append(ev);
  }
  if (step.result) {
    node.append(
      el(
        "div",
        { class: `step-result ${step.result.status}` },
        `result ${step.result.result_id ?? ""}: ${step.result.status}`,
      ),
    );
  }
  return node;
}

export function renderPlanPanel(
  root: HTMLElement,
  store: ConsoleStore,
  handlers: Handlers,
): void {
  root.replaceChildren();
  const head = el("div", { class: "panel-head" });
  head.append(el("span", { class: "title" }, "Plan review"));
  root.append(head);
  if (!store.plan) {
    root.append(el("p", { class: "placeholder" }, "No plan proposed."));
    if (store.lastExecution) {
      root.append(
        el(
          "div",
          { "data-testid": "execution-status", class: "exec-status" },
          `last execution ${store.lastExecution.plan_id}: ${store.lastExecution.status}`,
        ),
      );
    }
    return;
  }
  const plan = store.plan;
  root.append(
    el(
      "div",
      { class: "plan-meta", "data-testid": "plan-meta" },
      `${plan.plan_id} [${plan.task_kind}] status=${plan.status}`,
    ),
  );
  const steps = el("div", { class: "plan-steps" });
  plan.steps.forEach((step, i) => {
    steps.append(stepNode(step, i, plan.checkpoints.includes(i), handlers));
  });
  root.append(steps);

  const controls = el("div", { class: "verdict-controls", "data-testid": "verdict-controls" });
  const enabled = store.verdictControlsEnabled();
  const approve = el("button", { class: "approve", "data-testid": "verdict-approve" }, "Approve");
  const reject = el("button", { class: "reject", "data-testid": "verdict-reject" }, "Reject");
  const modify = el("button", { class: "modify", "data-testid": "verdict-modify" }, "Modify...");
  const amendment = el("textarea", {
    class: "amendment hidden",
    "data-testid": "amendment-input",
    placeholder: "Amendment, e.g. also cap civilian throughput at 10 mbps",
  });
  approve.disabled = reject.disabled = modify.disabled = !enabled;
  approve.addEventListener("click", () => handlers.onVerdict("approve"));
  reject.addEventListener("click", () => handlers.onVerdict("reject"));
  modify.addEventListener("click", () => {
    if (amendment.classList.contains("hidden")) {
      amendment.classList.remove("hidden");
      return;
    }
    if (amendment.value.trim()) handlers.onVerdict("modify", amendment.value.trim());
  });
  controls.append(approve, reject, modify, amendment);
  root.append(controls);

  if (store.lastExecution) {
    root.append(
      el(
        "div",
        { "data-testid": "execution-status", class: "exec-status" },
        `last execution ${store.lastExecution.plan_id}: ${store.lastExecution.status}`,
      ),
    );
  }
}

// ----------------------------------------------------------------- map view

function svgEl(tag: string, attrs: Record<string, string>): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  return node;
}

const MAP_SIZE = 440;

export function renderMap(root: HTMLElement, store: ConsoleStore): void {
  root.replaceChildren();
  const head = el("div", { class: "panel-head" });
  head.append(el("span", { class: "title" }, "Network map"));
  if (store.world) {
    head.append(
      el(
        "span",
        { class: "clock", "data-testid": "clock" },
        `slot ${store.world.clock_slot}${store.world.paused ? " (paused)" : ""}`,
      ),
    );
  }
  root.append(head);
  if (!store.world) {
    root.append(el("p", { class: "placeholder" }, "Waiting for telemetry..."));
    return;
  }
  const world = store.world;
  const scale = MAP_SIZE / world.area_side_m;
  const sx = (x: number) => x * scale;
  const sy = (y: number) => MAP_SIZE - y * scale; // north-up

  const svg = svgEl("svg", {
    viewBox: `0 0 ${MAP_SIZE} ${MAP_SIZE}`,
    width: String(MAP_SIZE),
    height: String(MAP_SIZE),
    class: "map-svg",
    "data-testid": "map-svg",
  });
  svg.append(
    svgEl("rect", {
      x: "0",
      y: "0",
      width: String(MAP_SIZE),
      height: String(MAP_SIZE),
      class: "map-area",
    }),
  );
  for (const s of world.sectors) {
    const rect = svgEl("rect", {
      x: String(sx(s.x_min)),
      y: String(sy(s.y_max)),
      width: String(sx(s.x_max - s.x_min)),
      height: String(sx(s.y_max - s.y_min)),
      class: "sector",
      "data-sector": s.name,
    });
    svg.append(rect);
    const label = svgEl("text", {
      x: String(sx(s.x_min) + 4),
      y: String(sy(s.y_max) + 14),
      class: "sector-label",
    });
    label.textContent = `Sector ${s.name}`;
    svg.append(label);
  }
  const uavById = new Map(world.uavs.map((u) => [u.id, u]));
  for (const link of world.links) {
    const uav = uavById.get(link.uav_id);
    const user = world.users.find((u) => u.id === link.user_id);
    if (!uav || !user) continue;
    svg.append(
      svgEl("line", {
        x1: String(sx(uav.x)),
        y1: String(sy(uav.y)),
        x2: String(sx(user.x)),
        y2: String(sy(user.y)),
        class: `link link-${linkQuality(link.path_loss_db, link.excess_attenuation_db)}`,
        "data-link": `${link.uav_id}:${link.user_id}`,
      }),
    );
  }
  for (const user of world.users) {
    svg.append(
      svgEl("circle", {
        cx: String(sx(user.x)),
        cy: String(sy(user.y)),
        r: "3",
        class: `user user-${user.group}`,
        "data-user": user.id,
      }),
    );
  }
  const eventTargets = new Set(
    world.active_events.map((e) => e.target.split(":")[0]),
  );
  for (const uav of world.uavs) {
    const group = svgEl("g", {
      class: `uav${uav.operational ? "" : " down"}`,
      "data-uav": uav.id,
      "data-altitude": String(uav.altitude_m),
    });
    if (eventTargets.has(uav.id)) {
      group.append(
        svgEl("circle", {
          cx: String(sx(uav.x)),
          cy: String(sy(uav.y)),
          r: "14",
          class: "event-ring",
        }),
      );
    }
    group.append(
      svgEl("rect", {
        x: String(sx(uav.x) - 6),
        y: String(sy(uav.y) - 6),
        width: "12",
        height: "12",
        class: "uav-marker",
      }),
    );
    const label = svgEl("text", {
      x: String(sx(uav.x) + 8),
      y: String(sy(uav.y) - 8),
      class: "uav-label",
    });
    label.textContent = `${uav.id} @${Math.round(uav.altitude_m)}m`;
    group.append(label);
    svg.append(group);
  }
  root.append(svg);

  if (world.active_events.length) {
    const badges = el("div", { class: "event-badges", "data-testid": "event-badges" });
    for (const ev of world.active_events) {
      badges.append(
        el(
          "span",
          { class: `event-badge ${ev.kind}` },
          `${ev.kind} on ${ev.target} (${ev.magnitude} dB)`,
        ),
      );
    }
    root.append(badges);
  }
}

// ---------------------------------------------------------------- KPI view

function sparkline(
  values: number[],
  width: number,
  height: number,
  cls: string,
): SVGElement {
  const path = svgEl("polyline", { class: `spark ${cls}`, fill: "none" });
  if (values.length) {
    const max = Math.max(...values, 1e-9);
    const pts = values
      .map((v, i) => {
        const x = (i / Math.max(values.length - 1, 1)) * width;
        const y = height - (v / max) * (height - 2) - 1;
        return `${x.toFixed(1)},${y.toFixed(1)}`;
      })
      .join(" ");
    path.setAttribute("points", pts);
  }
  return path;
}

export function renderKpis(root: HTMLElement, store: ConsoleStore): void {
  root.replaceChildren();
  const head = el("div", { class: "panel-head" });
  head.append(el("span", { class: "title" }, "KPIs"));
  head.append(
    el(
      "span",
      { class: `stream-dot ${store.streamConnected ? "on" : "off"}`, "data-testid": "stream-status" },
      store.streamConnected ? "live" : "disconnected",
    ),
  );
  root.append(head);
  const series = store.kpis;
  if (!series.slots.length) {
    root.append(el("p", { class: "placeholder" }, "No KPI samples yet."));
    return;
  }
  const isr = store.rollingIsr();
  const summary = el("div", { class: "kpi-summary" });
  summary.append(
    el(
      "span",
      { "data-testid": "kpi-isr" },
      `ISR(100): ${isr === null ? "-" : (100 * isr).toFixed(1)}%`,
    ),
    el(
      "span",
      { "data-testid": "kpi-ee" },
      `EE: ${series.eeMbitPerJoule[series.eeMbitPerJoule.length - 1].toFixed(2)} Mbit/J`,
    ),
    el(
      "span",
      { "data-testid": "kpi-endurance" },
      `endurance: ${Math.round(series.enduranceS[series.enduranceS.length - 1])} s`,
    ),
  );
  root.append(summary);

  const charts = el("div", { class: "kpi-charts", "data-testid": "kpi-charts" });
  const W = 420;
  const H = 46;
  for (const [cls, values] of [...series.throughputMbps.entries()].sort()) {
    const row = el("div", { class: "kpi-row", "data-kpi-class": cls });
    const last = values[values.length - 1];
    row.append(
      el("span", { class: "kpi-label" }, `${cls} ${last.toFixed(1)} Mbps`),
    );
    const svg = svgEl("svg", {
      viewBox: `0 0 ${W} ${H}`,
      width: String(W),
      height: String(H),
      class: "kpi-chart",
      "data-points": String(values.length),
    });
    svg.append(sparkline(values, W, H, `tp-${cls}`));
    row.append(svg);
    charts.append(row);
  }
  for (const [cls, values] of [...series.latencyMs.entries()].sort()) {
    const row = el("div", { class: "kpi-row", "data-kpi-latency": cls });
    const last = values[values.length - 1];
    row.append(
      el("span", { class: "kpi-label" }, `${cls} latency ${last.toFixed(2)} ms`),
    );
    const svg = svgEl("svg", {
      viewBox: `0 0 ${W} ${H}`,
      width: String(W),
      height: String(H),
      class: "kpi-chart",
      "data-points": String(values.length),
    });
    svg.append(sparkline(values, W, H, `lat-${cls}`));
    row.append(svg);
    charts.append(row);
  }
  root.append(charts);
}

// --------------------------------------------------------------- audit view

export function renderAudit(root: HTMLElement, store: ConsoleStore): void {
  root.replaceChildren();
  const head = el("div", { class: "panel-head" });
  head.append(el("span", { class: "title" }, "Audit log"));
  root.append(head);
  const list = el("div", { class: "audit-list", "data-testid": "audit-list" });
  for (const entry of store.audit.slice(-80).reverse()) {
    list.append(
      el(
        "div",
        { class: "audit-entry" },
        `#${entry.seq} slot ${entry.slot_stamp} ${entry.kind}`,
      ),
    );
  }
  root.append(list);
}

// ---------------------------------------------------------- evidence modal

export function renderEvidenceModal(
  root: HTMLElement,
  title: string,
  body: string,
): void {
  root.replaceChildren();
  const overlay = el("div", { class: "modal-overlay", "data-testid": "evidence-modal" });
  const box = el("div", { class: "modal" });
  box.append(el("h3", {}, title));
  box.append(el("pre", { class: "evidence-body" }, body));
  const close = el("button", { class: "primary" }, "Close");
  close.addEventListener("click", () => root.replaceChildren());
  box.append(close);
  overlay.append(box);
  root.append(overlay);
}
