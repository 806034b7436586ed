// Payload shapes mirrored from the gateway's versioned JSON envelopes.

export type ProtocolState =
  | "IDLE"
  | "INTENT_RECEIVED"
  | "ELICITING"
  | "PLANNING"
  | "PLAN_PROPOSED"
  | "APPROVED"
  | "EXECUTING"
  | "REPORTING"
  | "REJECTED";

export interface Envelope<T> {
  request_id: string;
  version: string;
  payload?: T;
  error?: { code: string; message: string };
}

export interface ClarifyingQuestion {
  prompt: string;
  options: string[];
  ambiguity_index: number;
}

export interface ToolCall {
  tool: string;
  args: Record<string, unknown>;
  call_id: string;
}

export interface ToolResultView {
  status: string;
  payload: unknown;
  slot_stamp: number;
  result_id: string | null;
  error: string | null;
}

export interface PlanStep {
  stage_label: string;
  rationale: string;
  evidence: string[];
  tool_call: ToolCall | null;
  side_effecting: boolean;
  result: ToolResultView | null;
}

export interface Plan {
  plan_id: string;
  task_kind: string;
  steps: PlanStep[];
  checkpoints: number[];
  status: string;
  hash: string;
}

export interface AuditEntry {
  seq: number;
  slot_stamp: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface SessionView {
  session_id: string;
  state: ProtocolState;
  history: { speaker: string; text: string; slot_stamp: number }[];
  pending_ambiguities: unknown[];
  current_plan: Plan | null;
  audit_log: AuditEntry[];
}

export interface SectorView {
  name: string;
  x_min: number;
  y_min: number;
  x_max: number;
  y_max: number;
}

export interface UavView {
  id: string;
  x: number;
  y: number;
  altitude_m: number;
  battery_j: number;
  tx_power_dbm: number;
  role: string;
  operational: boolean;
}

export interface UserView {
  id: string;
  x: number;
  y: number;
  group: string;
  sector: string | null;
  serving_uav: string;
  queue_bits: number;
}

export interface LinkView {
  uav_id: string;
  user_id: string;
  path_loss_db: number;
  excess_attenuation_db: number;
  los: boolean;
}

export interface EventView {
  event_id: string;
  kind: string;
  target: string;
  magnitude: number;
  start_slot: number;
  end_slot: number;
  ceiling_m: number | null;
}

export interface WorldSnapshot {
  clock_slot: number;
  paused: boolean;
  slot_duration_s: number;
  area_side_m: number;
  sectors: SectorView[];
  uavs: UavView[];
  users: UserView[];
  links: LinkView[];
  active_events: EventView[];
}

export interface SlotKpis {
  slot: number;
  satisfied: boolean;
  classes: Record<
    string,
    { throughput_mbps: number; mean_latency_ms: number; n_users: number }
  >;
  fleet_endurance_s: number;
  ee_mbit_per_joule: number;
}

export interface StreamEvent {
  report: { slot: number };
  world: WorldSnapshot;
  kpis: SlotKpis;
}

export interface IntentOutcome {
  kind: "intent" | "question";
  state: ProtocolState;
  intent?: Record<string, unknown>;
  question?: ClarifyingQuestion;
}

export interface VerdictOutcome {
  state: ProtocolState;
  verdict: string;
  plan?: Plan;
  question?: ClarifyingQuestion;
  execution?: { status: string; steps_run: number; plan_id: string };
}

export interface KnowledgeDocView {
  doc_id: string;
  kind: string;
  title: string;
  body: string;
  tags: string[];
  slot_stamp: number | null;
}
