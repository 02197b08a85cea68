// HTML is built as strings from already-typed wire data; everything dynamic
// goes through escapeHtml. Keeping these pure keeps them testable without a
// browser.

import type { AuditRecordWire, EscalationWire, LabelWire } from "./api.js";

export function escapeHtml(value: unknown): string {
  return String(value)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

function chip(label: LabelWire): string {
  return `<span class="chip">${escapeHtml(label.kind)} &middot; ${escapeHtml(
    label.source_id,
  )} &middot; ${escapeHtml(label.sensitivity)}</span>`;
}

export function isExternalOrigin(esc: EscalationWire, labels: LabelWire[]): boolean {
  return esc.call.origin_trust === "External" || labels.some((l) => l.kind === "UntrustedOrigin");
}

export interface CardOptions {
  reason?: string | null;
  labels?: LabelWire[];
  inflight?: boolean;
  error?: string | null;
}

export function renderPendingCard(esc: EscalationWire, opts: CardOptions = {}): string {
  const labels = opts.labels ?? [];
  const warn = isExternalOrigin(esc, labels)
    ? `<p class="warn">carries content of external origin; review before approving</p>`
    : "";
  const args = escapeHtml(JSON.stringify(esc.call.args, null, 2));
  const disabled = opts.inflight ? " disabled" : "";
  const error = opts.error ? `<p class="error">${escapeHtml(opts.error)}</p>` : "";
  return `<article class="card" data-approval="${escapeHtml(esc.approval_id)}">
  <header>
    <strong>${escapeHtml(esc.call.tool)}</strong>
    <code>${escapeHtml(esc.approval_id)}</code>
  </header>
  <dl>
    <dt>call</dt><dd><code>${escapeHtml(esc.call.call_id)}</code></dd>
    <dt>origin trust</dt><dd>${escapeHtml(esc.call.origin_trust)}</dd>
    <dt>reason</dt><dd><code>${escapeHtml(opts.reason ?? "approval:required")}</code></dd>
    <dt>matched rule</dt><dd><code>${escapeHtml(esc.matched_rule ?? "-")}</code></dd>
    <dt>labels</dt><dd>${labels.length ? labels.map(chip).join(" ") : "<em>none</em>"}</dd>
  </dl>
  ${warn}
  <details><summary>arguments</summary><pre>${args}</pre></details>
  ${error}
  <footer>
    <button data-act="approve" data-id="${escapeHtml(esc.approval_id)}"${disabled}>approve</button>
    <button data-act="deny" data-id="${escapeHtml(esc.approval_id)}"${disabled}>deny</button>
  </footer>
</article>`;
}

export function renderEmptyPending(): string {
  return `<p class="empty">no pending escalations</p>`;
}

export function renderAuditRow(record: AuditRecordWire): string {
  const verdict = record.decision.verdict;
  return `<tr class="verdict-${verdict.toLowerCase()}">
  <td>${record.seq}</td>
  <td><code>${escapeHtml(record.call.tool)}</code></td>
  <td>${escapeHtml(verdict)}</td>
  <td><code>${escapeHtml(record.decision.reason_code ?? "")}</code></td>
  <td><code>${escapeHtml(record.decision.matched_rule ?? "")}</code></td>
</tr>`;
}

export function renderAuditRows(records: AuditRecordWire[]): string {
  return records.map(renderAuditRow).join("\n");
}
