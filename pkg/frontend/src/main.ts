// DOM wiring: one event-stream consumer feeding one state fold, re-rendered
// wholesale on every change. Actions are plain POSTs; the server stays the
// only arbiter of write-once resolution.

import { ApiError, follow, MonitorClient } from "./api.js";
import {
  applyEvent,
  decisionRecordFor,
  filterAudit,
  initialState,
  labelsFor,
} from "./state.js";
import { renderAuditRows, renderEmptyPending, renderPendingCard } from "./render.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const serverInput = $<HTMLInputElement>("server");
const tokenInput = $<HTMLInputElement>("token");
const connectBtn = $<HTMLButtonElement>("connect");
const statusEl = $("status");
const pendingEl = $("pending");
const auditBody = $("audit-body");
const reasonFilter = $<HTMLInputElement>("filter-reason");
const toolFilter = $<HTMLInputElement>("filter-tool");

let state = initialState();
let client: MonitorClient | null = null;
let controller: AbortController | null = null;
const inflight = new Set<string>();
const errors = new Map<string, string>();

function renderPending(): void {
  if (state.pending.length === 0) {
    pendingEl.innerHTML = renderEmptyPending();
    return;
  }
  pendingEl.innerHTML = state.pending
    .map((esc) =>
      renderPendingCard(esc, {
        reason: decisionRecordFor(state, esc)?.decision.reason_code,
        labels: labelsFor(state, esc),
        inflight: inflight.has(esc.approval_id),
        error: errors.get(esc.approval_id) ?? null,
      }),
    )
    .join("\n");
}

function renderAudit(): void {
  const filtered = filterAudit(state.audit, {
    reason: reasonFilter.value.trim() || undefined,
    tool: toolFilter.value.trim() || undefined,
  });
  auditBody.innerHTML = renderAuditRows(filtered);
}

function renderAll(): void {
  renderPending();
  renderAudit();
}

async function act(approvalId: string, granted: boolean): Promise<void> {
  if (!client || inflight.has(approvalId)) return;
  inflight.add(approvalId);
  errors.delete(approvalId);
  renderPending();
  try {
    await client.resolve(approvalId, granted, tokenInput.value ? "console-operator" : "operator");
  } catch (err) {
    errors.set(approvalId, err instanceof ApiError ? err.message : String(err));
  } finally {
    inflight.delete(approvalId);
    renderPending(); // resolution events will clear the card; errors stay inline
  }
}

pendingEl.addEventListener("click", (ev) => {
  const button = (ev.target as HTMLElement).closest<HTMLButtonElement>("button[data-act]");
  if (!button) return;
  void act(button.dataset.id ?? "", button.dataset.act === "approve");
});

for (const input of [reasonFilter, toolFilter]) {
  input.addEventListener("input", renderAudit);
}

connectBtn.addEventListener("click", () => {
  controller?.abort();
  controller = new AbortController();
  state = initialState();
  inflight.clear();
  errors.clear();
  renderAll();
  client = new MonitorClient(serverInput.value, tokenInput.value || undefined);
  statusEl.textContent = "connecting";
  void follow(
    client,
    (ev) => {
      if (applyEvent(state, ev)) {
        renderAll();
        statusEl.textContent = `live, event ${state.lastEventId}`;
      }
    },
    {
      signal: controller.signal,
      onStatus: (s) => {
        statusEl.textContent = s === "connected" ? "connected" : "connection lost, retrying";
      },
    },
  );
});

renderAll();
