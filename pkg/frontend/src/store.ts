// Console view-model: plain data in, plain data out, no DOM and no
// network. Every displayed number comes from a payload field kept here.

import type {
  ClarifyingQuestion,
  Plan,
  ProtocolState,
  SlotKpis,
  StreamEvent,
  WorldSnapshot,
  AuditEntry,
} from "./types";

export const KPI_WINDOW = 300; // rolling points kept per chart

export interface KpiSeries {
  slots: number[];
  satisfied: (0 | 1)[];
  throughputMbps: Map<string, number[]>;
  latencyMs: Map<string, number[]>;
  enduranceS: number[];
  eeMbitPerJoule: number[];
}

export interface TranscriptEntry {
  speaker: "operator" | "copilot" | "system";
  text: string;
}

export class ConsoleStore {
  sessionId: string | null = null;
  sessionState: ProtocolState = "IDLE";
  transcript: TranscriptEntry[] = [];
  question: ClarifyingQuestion | null = null;
  plan: Plan | null = null;
  lastExecution: { status: string; plan_id: string } | null = null;
  executionUpdates = 0; // server-confirmed execution responses seen
  world: WorldSnapshot | null = null;
  audit: AuditEntry[] = [];
  kpis: KpiSeries = emptySeries();
  streamConnected = false;
  lastStreamSlot = -1;
  errorBanner: string | null = null;

  /** Verdict buttons are live only while a plan awaits review. */
  verdictControlsEnabled(): boolean {
    return this.sessionState === "PLAN_PROPOSED" && this.plan !== null;
  }

  intentSubmittable(text: string): boolean {
    return text.trim().length > 0 && this.sessionState === "IDLE";
  }

  applySessionState(state: ProtocolState): void {
    this.sessionState = state;
  }

  applyQuestion(q: ClarifyingQuestion | null): void {
    this.question = q;
    if (q) this.transcript.push({ speaker: "copilot", text: q.prompt });
  }

  applyPlan(plan: Plan | null): void {
    this.plan = plan;
  }

  applyStreamEvent(ev: StreamEvent): void {
    // duplicate-slot guard: reconnects must never double-append
    if (ev.report.slot <= this.lastStreamSlot) return;
    this.lastStreamSlot = ev.report.slot;
    this.world = ev.world;
    pushKpis(this.kpis, ev.kpis);
  }

  applyWorld(world: WorldSnapshot): void {
    this.world = world;
  }

  rollingIsr(window = 100): number | null {
    const s = this.kpis.satisfied;
    if (!s.length) return null;
    const tail = s.slice(-window);
    return tail.reduce((a: number, b) => a + b, 0) / tail.length;
  }
}

export function emptySeries(): KpiSeries {
  return {
    slots: [],
    satisfied: [],
    throughputMbps: new Map(),
    latencyMs: new Map(),
    enduranceS: [],
    eeMbitPerJoule: [],
  };
}

export function pushKpis(series: KpiSeries, k: SlotKpis): void {
  series.slots.push(k.slot);
  series.satisfied.push(k.satisfied ? 1 : 0);
  series.enduranceS.push(k.fleet_endurance_s);
  series.eeMbitPerJoule.push(k.ee_mbit_per_joule);
  const classes = new Set([
    ...Object.keys(k.classes),
    ...series.throughputMbps.keys(),
  ]);
  for (const cls of classes) {
    const tp = series.throughputMbps.get(cls) ?? [];
    const lat = series.latencyMs.get(cls) ?? [];
    // absent classes pad with zero so all series stay slot-aligned
    tp.push(k.classes[cls]?.throughput_mbps ?? 0);
    lat.push(k.classes[cls]?.mean_latency_ms ?? 0);
    series.throughputMbps.set(cls, tp);
    series.latencyMs.set(cls, lat);
  }
  if (series.slots.length > KPI_WINDOW) {
    const cut = series.slots.length - KPI_WINDOW;
    series.slots.splice(0, cut);
    series.satisfied.splice(0, cut);
    series.enduranceS.splice(0, cut);
    series.eeMbitPerJoule.splice(0, cut);
    for (const arr of series.throughputMbps.values()) arr.splice(0, cut);
    for (const arr of series.latencyMs.values()) arr.splice(0, cut);
  }
}

/** Link quality bucket for map coloring, from path loss + event excess. */
export function linkQuality(
  pathLossDb: number,
  excessDb: number,
): "good" | "fair" | "poor" {
  const total = pathLossDb + excessDb;
  if (total <= 110) return "good";
  if (total <= 130) return "fair";
  return "poor";
}
