// Client for the monitor's operator API. Read/act-only by construction:
// the four documented endpoints are the only ones this module knows.

export interface LabelWire {
  kind: string;
  source_id: string;
  sensitivity: string;
}

export interface ArgWire {
  value: unknown;
  labels: LabelWire[];
}

export interface ToolCallWire {
  call_id: string;
  tool: string;
  args: Record<string, unknown>;
  origin_trust: string;
  task_id: string | null;
}

export interface DecisionWire {
  verdict: "Allow" | "Deny" | "Pending";
  reason_code: string | null;
  matched_rule: string | null;
  approval_id: string | null;
}

export interface AuditRecordWire {
  seq: number;
  call: ToolCallWire;
  decision: DecisionWire;
  label_snapshot: LabelWire[];
  timestamp: number;
}

export interface EscalationWire {
  approval_id: string;
  call: ToolCallWire;
  matched_rule: string | null;
  created_seq: number;
  status: "pending" | "approved" | "denied";
  resolved_seq: number | null;
  operator: string | null;
}

export type ConsoleEvent =
  | { id: number; event: "audit-appended"; data: AuditRecordWire }
  | { id: number; event: "escalation-created"; data: EscalationWire }
  | { id: number; event: "escalation-resolved"; data: EscalationWire }
  | { id?: undefined; event: "heartbeat" };

export interface Resolution {
  resolution: AuditRecordWire;
  escalation: EscalationWire;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class MonitorClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token?: string,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private headers(): Record<string, string> {
    return this.token ? { "X-Operator-Token": this.token } : {};
  }

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const res = await fetch(this.baseUrl + path, {
      ...init,
      headers: { ...this.headers(), ...(init?.headers as Record<string, string>) },
    });
    const text = await res.text();
    let body: unknown = null;
    try {
      body = text ? JSON.parse(text) : null;
    } catch {
      body = null;
    }
    if (!res.ok) {
      const detail =
        body && typeof body === "object" && "error" in body
          ? String((body as { error: unknown }).error)
          : `HTTP ${res.status}`;
      throw new ApiError(res.status, detail);
    }
    return body;
  }

  async pending(): Promise<EscalationWire[]> {
    const body = (await this.request("/v1/pending")) as { pending: EscalationWire[] };
    return body.pending;
  }

  async resolve(approvalId: string, granted: boolean, approver: string): Promise<Resolution> {
    return (await this.request(`/v1/approvals/${encodeURIComponent(approvalId)}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ granted, approver }),
    })) as Resolution;
  }

  async audit(since = 0): Promise<{ records: AuditRecordWire[]; latest_seq: number }> {
    return (await this.request(`/v1/audit?since=${since}`)) as {
      records: AuditRecordWire[];
      latest_seq: number;
    };
  }

  /** Yield events from the ndjson stream, heartbeats included, until the
   * connection closes or `signal` aborts. */
  async *events(since = 0, signal?: AbortSignal): AsyncGenerator<ConsoleEvent> {
    const res = await fetch(`${this.baseUrl}/v1/events?since=${since}`, {
      headers: this.headers(),
      signal,
    });
    if (!res.ok || !res.body) {
      throw new ApiError(res.status, `event stream refused (HTTP ${res.status})`);
    }
    const reader = res.body.getReader();
    const decoder = new TextDecoder();
    let buffered = "";
    try {
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        buffered += decoder.decode(value, { stream: true });
        let nl;
        while ((nl = buffered.indexOf("\n")) >= 0) {
          const line = buffered.slice(0, nl).trim();
          buffered = buffered.slice(nl + 1);
          if (line) yield JSON.parse(line) as ConsoleEvent;
        }
      }
    } finally {
      reader.cancel().catch(() => undefined);
    }
  }
}

function delay(ms: number, signal?: AbortSignal): Promise<void> {
  return new Promise((resolve) => {
    const t = setTimeout(resolve, ms);
    signal?.addEventListener("abort", () => {
      clearTimeout(t);
      resolve();
    });
  });
}

export interface FollowOptions {
  since?: number;
  retryMs?: number;
  signal?: AbortSignal;
  onStatus?: (status: "connected" | "retrying") => void;
}

/** Consume the event stream forever, reconnecting with ?since=<last id> so
 * no event is dropped across reconnects. Returns when `signal` aborts. */
export async function follow(
  client: MonitorClient,
  onEvent: (ev: ConsoleEvent) => void,
  opts: FollowOptions = {},
): Promise<void> {
  let since = opts.since ?? 0;
  const retryMs = opts.retryMs ?? 1000;
  for (;;) {
    if (opts.signal?.aborted) return;
    try {
      opts.onStatus?.("connected");
      for await (const ev of client.events(since, opts.signal)) {
        if (typeof ev.id === "number") since = ev.id;
        onEvent(ev);
      }
    } catch {
      if (opts.signal?.aborted) return;
    }
    if (opts.signal?.aborted) return;
    opts.onStatus?.("retrying");
    await delay(retryMs, opts.signal);
  }
}
