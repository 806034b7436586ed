// Gateway client. The console talks to the network exclusively through
// this module: JSON envelopes over fetch, plus a hand-rolled SSE reader
// (fetch + ReadableStream) so the same code runs in browsers and in tests.

import type {
  Envelope,
  IntentOutcome,
  KnowledgeDocView,
  Plan,
  SessionView,
  StreamEvent,
  AuditEntry,
  VerdictOutcome,
  WorldSnapshot,
} from "./types";

export class GatewayError extends Error {
  constructor(
    public code: string,
    message: string,
    public status: number,
  ) {
    super(message);
  }
}

async function unwrap<T>(resp: Response): Promise<T> {
  const body = (await resp.json()) as Envelope<T>;
  if (body.error) {
    throw new GatewayError(body.error.code, body.error.message, resp.status);
  }
  return body.payload as T;
}

export class GatewayClient {
  constructor(public baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  private async post<T>(path: string, body?: unknown): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? "{}" : JSON.stringify(body),
    });
    return unwrap<T>(resp);
  }

  private async get<T>(path: string): Promise<T> {
    return unwrap<T>(await fetch(this.baseUrl + path));
  }

  createSession(): Promise<{ session_id: string; state: string }> {
    return this.post("/sessions");
  }

  getSession(id: string): Promise<SessionView> {
    return this.get(`/sessions/${id}`);
  }

  submitIntent(id: string, text: string): Promise<IntentOutcome> {
    return this.post(`/sessions/${id}/intent`, { text });
  }

  answer(id: string, choice: string): Promise<IntentOutcome> {
    return this.post(`/sessions/${id}/answer`, { choice });
  }

  proposePlan(id: string): Promise<{ plan: Plan; state: string }> {
    return this.post(`/sessions/${id}/plan`);
  }

  getPlan(id: string): Promise<{ plan: Plan; state: string }> {
    return this.get(`/sessions/${id}/plan`);
  }

  verdict(id: string, verdict: string, text?: string): Promise<VerdictOutcome> {
    return this.post(`/sessions/${id}/verdict`, { verdict, text });
  }

  audit(id: string): Promise<{ audit_log: AuditEntry[] }> {
    return this.get(`/sessions/${id}/audit`);
  }

  state(): Promise<WorldSnapshot> {
    return this.get("/state");
  }

  simStart(): Promise<{ paused: boolean }> {
    return this.post("/sim/start");
  }

  simPause(): Promise<{ paused: boolean }> {
    return this.post("/sim/pause");
  }

  simStep(slots: number): Promise<{ clock_slot: number }> {
    return this.post("/sim/step", { slots });
  }

  tools(): Promise<{ tools: { name: string; side_effecting: boolean }[] }> {
    return this.get("/tools");
  }

  knowledgeDoc(docId: string): Promise<KnowledgeDocView> {
    return this.get(`/knowledge/docs/${docId}`);
  }
}

/** Incremental server-sent-events parser; exported for unit tests. */
export function parseSseChunk(
  buffer: string,
): { events: { id?: string; data: string }[]; rest: string } {
  const events: { id?: string; data: string }[] = [];
  const blocks = buffer.split("\n\n");
  const rest = blocks.pop() ?? "";
  for (const block of blocks) {
    let id: string | undefined;
    const dataLines: string[] = [];
    for (const line of block.split("\n")) {
      if (line.startsWith("id: ")) id = line.slice(4);
      else if (line.startsWith("data: ")) dataLines.push(line.slice(6));
      // comment lines (": keep-alive") are dropped
    }
    if (dataLines.length) events.push({ id, data: dataLines.join("\n") });
  }
  return { events, rest };
}

export interface StreamHandle {
  close(): void;
  done: Promise<void>;
}

/**
 * Telemetry subscription. Reconnects with the last delivered slot as the
 * cursor, so a drop never duplicates or skips slots at the decimation
 * granularity.
 */
export function openTelemetryStream(
  baseUrl: string,
  opts: {
    decimation?: number;
    fromSlot?: number;
    onEvent: (ev: StreamEvent) => void;
    onStatus?: (connected: boolean) => void;
    limit?: number;
  },
): StreamHandle {
  const decimation = opts.decimation ?? 1;
  let cursor = opts.fromSlot ?? -1;
  let closed = false;
  const controller = { abort: new AbortController() };

  const done = (async () => {
    while (!closed) {
      const params = new URLSearchParams({
        cursor: String(cursor),
        decimation: String(decimation),
      });
      if (opts.limit) params.set("limit", String(opts.limit));
      try {
        const resp = await fetch(
          `${baseUrl.replace(/\/$/, "")}/stream/telemetry?${params}`,
          { signal: controller.abort.signal },
        );
        if (!resp.ok || !resp.body) throw new Error(`stream http ${resp.status}`);
        opts.onStatus?.(true);
        const reader = resp.body.getReader();
        const decoder = new TextDecoder();
        let buffer = "";
        for (;;) {
          const { value, done: eof } = await reader.read();
          if (eof) break;
          buffer += decoder.decode(value, { stream: true });
          const { events, rest } = parseSseChunk(buffer);
          buffer = rest;
          for (const raw of events) {
            const ev = JSON.parse(raw.data) as StreamEvent;
            cursor = ev.report.slot;
            opts.onEvent(ev);
          }
        }
        if (opts.limit) {
          closed = true; // bounded subscription completed
        }
      } catch (err) {
        if (closed) break;
        opts.onStatus?.(false);
        await new Promise((r) => setTimeout(r, 500));
      }
    }
    opts.onStatus?.(false);
  })();

  return {
    close() {
      closed = true;
      controller.abort.abort();
    },
    done,
  };
}
