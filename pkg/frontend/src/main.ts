// Console wiring: one store, one gateway client, re-render on change.
// No optimistic UI: every state shown was confirmed by a server response
// or arrived on the telemetry stream.

import { GatewayClient, openTelemetryStream, GatewayError } from "./api";
import { ConsoleStore } from "./store";
import {
  Handlers,
  renderAudit,
  renderEvidenceModal,
  renderKpis,
  renderMap,
  renderPlanPanel,
  renderSessionPanel,
} from "./render";
import type { IntentOutcome, VerdictOutcome } from "./types";

export function gatewayBaseUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("gateway");
  if (fromQuery) return fromQuery;
  return (
    (import.meta as { env?: Record<string, string> }).env?.VITE_GATEWAY_URL ??
    "http://127.0.0.1:8440"
  );
}

export interface App {
  store: ConsoleStore;
  client: GatewayClient;
  render(): void;
  shutdown(): void;
  ready: Promise<void>;
}

export function mountApp(root: HTMLElement, baseUrl: string): App {
  root.innerHTML = `
    <header class="top-bar">
      <span class="brand">lawnet copilot console</span>
      <span class="gateway-url">${baseUrl}</span>
      <div class="sim-controls">
        <button data-testid="sim-start">start</button>
        <button data-testid="sim-pause">pause</button>
        <button data-testid="sim-step">step 50</button>
      </div>
    </header>
    <main class="grid">
      <section id="session-panel" class="panel"></section>
      <section id="plan-panel" class="panel"></section>
      <section id="map-panel" class="panel"></section>
      <section id="kpi-panel" class="panel"></section>
      <section id="audit-panel" class="panel wide"></section>
    </main>
    <div id="modal-root"></div>
  `;

  const store = new ConsoleStore();
  const client = new GatewayClient(baseUrl);
  const panels = {
    session: root.querySelector<HTMLElement>("#session-panel")!,
    plan: root.querySelector<HTMLElement>("#plan-panel")!,
    map: root.querySelector<HTMLElement>("#map-panel")!,
    kpi: root.querySelector<HTMLElement>("#kpi-panel")!,
    audit: root.querySelector<HTMLElement>("#audit-panel")!,
    modal: root.querySelector<HTMLElement>("#modal-root")!,
  };

  const render = () => {
    renderSessionPanel(panels.session, store, handlers);
    renderPlanPanel(panels.plan, store, handlers);
    renderMap(panels.map, store);
    renderKpis(panels.kpi, store);
    renderAudit(panels.audit, store);
  };

  const fail = (err: unknown) => {
    store.errorBanner =
      err instanceof GatewayError ? `${err.code}: ${err.message}` : String(err);
    render();
  };

  const refreshAudit = async () => {
    if (!store.sessionId) return;
    const { audit_log } = await client.audit(store.sessionId);
    store.audit = audit_log;
  };

  const applyIntentOutcome = (out: IntentOutcome) => {
    store.applySessionState(out.state);
    store.errorBanner = null;
    if (out.kind === "question" && out.question) {
      store.applyQuestion(out.question);
    } else {
      store.question = null;
      store.transcript.push({
        speaker: "system",
        text: `intent accepted (${out.state})`,
      });
    }
  };

  const handlers: Handlers = {
    onSubmitIntent(text) {
      (async () => {
        if (!store.sessionId) return;
        store.transcript.push({ speaker: "operator", text });
        const out = await client.submitIntent(store.sessionId, text);
        applyIntentOutcome(out);
        if (out.state === "PLANNING") {
          const { plan, state } = await client.proposePlan(store.sessionId!);
          store.applyPlan(plan);
          store.applySessionState(state as IntentOutcome["state"]);
        }
        await refreshAudit();
        render();
      })().catch(fail);
    },
    onAnswer(choice) {
      (async () => {
        if (!store.sessionId) return;
        store.transcript.push({ speaker: "operator", text: choice });
        const out = await client.answer(store.sessionId, choice);
        store.question = null;
        applyIntentOutcome(out);
        if (out.state === "PLANNING") {
          const { plan, state } = await client.proposePlan(store.sessionId!);
          store.applyPlan(plan);
          store.applySessionState(state as IntentOutcome["state"]);
        }
        await refreshAudit();
        render();
      })().catch(fail);
    },
    onProposePlan() {
      (async () => {
        if (!store.sessionId) return;
        const { plan, state } = await client.proposePlan(store.sessionId);
        store.applyPlan(plan);
        store.applySessionState(state as IntentOutcome["state"]);
        await refreshAudit();
        render();
      })().catch(fail);
    },
    onVerdict(verdict, text) {
      (async () => {
        if (!store.sessionId) return;
        const out: VerdictOutcome = await client.verdict(
          store.sessionId,
          verdict,
          text,
        );
        store.applySessionState(out.state);
        store.applyPlan(out.plan ?? null);
        if (out.question) store.applyQuestion(out.question);
        if (out.execution) {
          store.lastExecution = {
            status: out.execution.status,
            plan_id: out.execution.plan_id,
          };
          store.executionUpdates += 1;
          store.transcript.push({
            speaker: "system",
            text: `execution ${out.execution.plan_id}: ${out.execution.status}`,
          });
        }
        await refreshAudit();
        render();
      })().catch(fail);
    },
    onSimControl(action) {
      (async () => {
        if (action === "start") await client.simStart();
        else if (action === "pause") await client.simPause();
        else await client.simStep(50);
        store.applyWorld(await client.state());
        render();
      })().catch(fail);
    },
    onEvidenceClick(ref) {
      (async () => {
        try {
          const doc = await client.knowledgeDoc(ref);
          renderEvidenceModal(panels.modal, doc.title, doc.body);
        } catch {
          renderEvidenceModal(
            panels.modal,
            ref,
            "tool result reference (see audit log)",
          );
        }
      })().catch(fail);
    },
  };

  root
    .querySelector("[data-testid=sim-start]")!
    .addEventListener("click", () => handlers.onSimControl("start"));
  root
    .querySelector("[data-testid=sim-pause]")!
    .addEventListener("click", () => handlers.onSimControl("pause"));
  root
    .querySelector("[data-testid=sim-step]")!
    .addEventListener("click", () => handlers.onSimControl("step"));

  const stream = openTelemetryStream(baseUrl, {
    decimation: 5,
    onEvent: (ev) => {
      store.applyStreamEvent(ev);
      renderMap(panels.map, store);
      renderKpis(panels.kpi, store);
    },
    onStatus: (connected) => {
      store.streamConnected = connected;
      renderKpis(panels.kpi, store);
    },
  });

  const ready = (async () => {
    store.applyWorld(await client.state());
    const { session_id, state } = await client.createSession();
    store.sessionId = session_id;
    store.applySessionState(state as IntentOutcome["state"]);
    render();
  })();
  ready.catch(fail);

  return {
    store,
    client,
    render,
    shutdown: () => stream.close(),
    ready,
  };
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  mountApp(document.getElementById("app")!, gatewayBaseUrl());
}
