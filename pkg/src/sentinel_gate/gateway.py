"""The reference monitor.  Every tool call passes through ``mediate``, which
runs a fixed pipeline and appends exactly one audit record per call:

1. tamper guard     - writes under protected paths are refused outright
2. policy           - first-match rule evaluation, trust-gated policy merges
3. flow check       - argument labels against the target sink's clearance
4. scanners         - smuggling, ANSI, URL, command, and markdown checks
5. approval         - require-approval matches open an operator escalation

Denials never execute.  Pending calls execute only after an operator
approves, which appends a second audit record for the resolution.  In
Permissive mode the same pipeline runs and records its verdicts, but
execution proceeds regardless; the scenario harness uses that mode to show
what an unmediated agent would have leaked.
"""

from __future__ import annotations

import hashlib
import json
import shlex
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional
from urllib.parse import urlsplit

from .ifc import (
    SecretRegistry,
    SinkDescriptor,
    SinkKind,
    check_flow,
    propagate_call,
)
from .model import (
    AuditRecord,
    Decision,
    EMPTY_LABELS,
    Label,
    LabelKind,
    LabelSet,
    Segment,
    Sensitivity,
    ToolCall,
    TrustLevel,
    Verdict,
    iter_arg_leaves,
)
from .policy import (
    Policy,
    PrivilegeEscalationError,
    PolicySyntaxError,
    DuplicateRuleIdError,
    evaluate,
    merge_policies,
    parse_policy,
)
from .sandbox import Handler, ToolResult, World, h_noop
from . import sandbox
from .scanners import (
    Finding,
    FindingKind,
    scan_command,
    scan_markdown_images,
    scan_unicode_smuggling,
    scan_url,
    strip_ansi,
)

# The closed set of reason codes that can appear on a Deny or Pending record.
REASON_DEFAULT_DENY = "default-deny"
REASON_PORT_OUT_OF_RANGE = "port-out-of-range"
REASON_POLICY_DENY = "policy-deny"
REASON_TCB_TAMPER = "tcb-tamper"
REASON_FLOW_VIOLATION = "flow-violation"
REASON_PRIVILEGE_ESCALATION = "privilege-escalation"
REASON_APPROVAL_REQUIRED = "approval:required"
REASON_APPROVAL_DENIED = "approval-denied"
REASON_APPROVAL_MEMORY_WRITE = "approval:memory-write"

SCANNER_REASONS: dict[FindingKind, str] = {
    FindingKind.UNICODE_SMUGGLING: "scanner:unicode-smuggling",
    FindingKind.ANSI_OSC52: "scanner:osc52",
    FindingKind.TAINTED_URL_PARAM: "scanner:tainted-url",
    FindingKind.ENCODED_SECRET: "scanner:encoded-secret",
    FindingKind.DNS_EXFIL: "scanner:dns-exfil",
    FindingKind.UNAPPROVED_DOMAIN: "scanner:unapproved-domain",
}

# When several denying findings fire on one call, the reason comes from the
# most specific channel: a resolving hostname beats a suspicious URL string.
DENY_SEVERITY: tuple[FindingKind, ...] = (
    FindingKind.DNS_EXFIL,
    FindingKind.UNICODE_SMUGGLING,
    FindingKind.ENCODED_SECRET,
    FindingKind.ANSI_OSC52,
    FindingKind.TAINTED_URL_PARAM,
    FindingKind.UNAPPROVED_DOMAIN,
)

ALL_REASON_CODES = frozenset(
    {
        REASON_DEFAULT_DENY,
        REASON_PORT_OUT_OF_RANGE,
        REASON_POLICY_DENY,
        REASON_TCB_TAMPER,
        REASON_FLOW_VIOLATION,
        REASON_PRIVILEGE_ESCALATION,
        REASON_APPROVAL_REQUIRED,
        REASON_APPROVAL_DENIED,
        REASON_APPROVAL_MEMORY_WRITE,
    }
    | set(SCANNER_REASONS.values())
)


class Mode(Enum):
    MONITORED = "Monitored"
    PERMISSIVE = "Permissive"


class UnknownToolError(KeyError):
    """Mediation was asked about a tool that was never registered."""


class SessionClosedError(RuntimeError):
    """The session was closed; no further segments or calls are accepted."""


class NotAuthorizedError(PermissionError):
    """execute() was reached without a prior Allow record for the call_id."""


class ExecutorFailure(RuntimeError):
    """The tool handler itself raised; wraps the original exception."""


class NoSuchApprovalError(KeyError):
    pass


class AlreadyResolvedError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProtectedPathSet:
    """Path prefixes the agent must never mutate: the monitor's own config,
    policies, and audit storage live here."""

    prefixes: tuple[str, ...] = ("/agent",)

    def covers(self, path: str) -> bool:
        for p in self.prefixes:
            if path == p or path.startswith(p.rstrip("/") + "/"):
                return True
        return False


@dataclass(frozen=True)
class ToolDescriptor:
    """Registration record binding a tool name to its handler and sink.

    domain_from names the argument whose URL or hostname selects the sink
    for NetworkDomain/Browser tools.  scan_profile picks the stage-4
    scanners: "text" (always applied), "url", "command", or "markdown".
    """

    name: str
    handler: Handler
    sink_kind: Optional[SinkKind] = None
    sink_id: Optional[str] = None
    domain_from: Optional[str] = None
    scan_profile: str = "text"
    # Trust of the context segment the tool's result is appended as: network
    # and web tools return attacker-influenceable content (External), local
    # reads return what the user already had (User).
    result_trust: TrustLevel = TrustLevel.USER


@dataclass
class PendingEscalation:
    approval_id: str
    call: ToolCall
    matched_rule: Optional[str]
    created_seq: int
    status: str = "pending"  # pending | approved | denied
    resolved_seq: Optional[int] = None
    operator: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "approval_id": self.approval_id,
            "call": self.call.to_dict(),
            "matched_rule": self.matched_rule,
            "created_seq": self.created_seq,
            "status": self.status,
            "resolved_seq": self.resolved_seq,
            "operator": self.operator,
        }


def _lab(kind: LabelKind, sens: Sensitivity) -> Label:
    return Label(kind, "*", sens)


DEFAULT_SINK_CLEARANCES: dict[str, LabelSet] = {
    "terminal": LabelSet(
        [_lab(LabelKind.TOOL_OUTPUT, Sensitivity.PUBLIC), _lab(LabelKind.UNTRUSTED_ORIGIN, Sensitivity.PUBLIC)]
    ),
    "shell": LabelSet([_lab(LabelKind.TOOL_OUTPUT, Sensitivity.PUBLIC)]),
    "clipboard": LabelSet(
        [_lab(LabelKind.TOOL_OUTPUT, Sensitivity.PUBLIC), _lab(LabelKind.UNTRUSTED_ORIGIN, Sensitivity.PUBLIC)]
    ),
    "memory": LabelSet(
        [_lab(LabelKind.TOOL_OUTPUT, Sensitivity.PUBLIC), _lab(LabelKind.UNTRUSTED_ORIGIN, Sensitivity.PUBLIC)]
    ),
    "file": LabelSet(
        [_lab(LabelKind.TOOL_OUTPUT, Sensitivity.PUBLIC), _lab(LabelKind.UNTRUSTED_ORIGIN, Sensitivity.PUBLIC)]
    ),
    "ui": LabelSet(
        [_lab(LabelKind.TOOL_OUTPUT, Sensitivity.PUBLIC), _lab(LabelKind.UNTRUSTED_ORIGIN, Sensitivity.PUBLIC)]
    ),
}

_MUTATING_FS_TOOLS = frozenset({"fs.write", "fs.delete", "fs.append"})

EventHook = Callable[[str, dict], None]


class SessionContext:
    """Mutable per-session state: policy, world, context window, audit log."""

    def __init__(
        self,
        session_id: str,
        policy: Policy,
        world: Optional[World] = None,
        mode: Mode = Mode.MONITORED,
        protected: ProtectedPathSet = ProtectedPathSet(),
        approved_domains: Optional[set[str]] = None,
        domain_clearances: Optional[dict[str, LabelSet]] = None,
        sink_clearances: Optional[dict[str, LabelSet]] = None,
        safe_port_range: Optional[tuple[int, int]] = None,
        auto_approve: bool = False,
    ):
        self.session_id = session_id
        self.policy = policy
        self.world = world if world is not None else World()
        self.mode = mode
        self.protected = protected
        self.approved_domains: set[str] = {d.lower() for d in (approved_domains or set())}
        self.domain_clearances: dict[str, LabelSet] = dict(domain_clearances or {})
        self.sink_clearances: dict[str, LabelSet] = dict(DEFAULT_SINK_CLEARANCES)
        if sink_clearances:
            self.sink_clearances.update(sink_clearances)
        # Operator-only knobs: nothing reachable through mediate() can write
        # these, which is what makes auto_approve safe to even have.
        self.safe_port_range = safe_port_range
        self.auto_approve = auto_approve
        self.segments: list[Segment] = []
        self.audit: list[AuditRecord] = []
        self.pending: dict[str, PendingEscalation] = {}
        self.results: dict[str, ToolResult] = {}
        self.turns: dict[str, int] = {}
        self.closed = False
        self._seq = 0
        self._approval_counter = 0
        self._segment_counter = 0
        self._allowed_ids: set[str] = set()
        self.hooks: list[EventHook] = []

    def close(self) -> None:
        self.closed = True

    @property
    def registry(self) -> SecretRegistry:
        return self.world.registry

    def next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def next_approval_id(self) -> str:
        self._approval_counter += 1
        return f"approval-{self._approval_counter}"

    def emit(self, event: str, payload: dict) -> None:
        for hook in list(self.hooks):
            hook(event, payload)

    def audit_digest(self) -> str:
        """SHA-256 over the audit log in canonical JSONL with timestamps zeroed."""
        lines = []
        for rec in self.audit:
            d = rec.to_dict()
            d["timestamp"] = 0
            lines.append(json.dumps(d, sort_keys=True, separators=(",", ":")))
        return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


class Gateway:
    def __init__(self, session: SessionContext):
        self.session = session
        self.tools: dict[str, ToolDescriptor] = {}

    # -- registration -------------------------------------------------------

    def register_tool(self, td: ToolDescriptor) -> None:
        if td.name in self.tools:
            raise ValueError(f"tool already registered: {td.name}")
        self.tools[td.name] = td

    def register_default_tools(self) -> None:
        for td in default_toolset():
            self.register_tool(td)

    def append_segment(self, segment: Segment) -> None:
        if self.session.closed:
            raise SessionClosedError(self.session.session_id)
        self.session.segments.append(segment)

    def append_content(
        self,
        content: str | bytes,
        trust: TrustLevel,
        labels: LabelSet = EMPTY_LABELS,
        source: Optional[str] = None,
        segment_id: Optional[int | str] = None,
    ) -> Segment:
        """Append context content as a new segment.

        External content automatically gains an UntrustedOrigin label keyed
        by its source, so a later flow check can always see where it entered.
        """
        if self.session.closed:
            raise SessionClosedError(self.session.session_id)
        self.session._segment_counter += 1
        if segment_id is None:
            segment_id = f"seg-{self.session._segment_counter}"
        if trust is TrustLevel.EXTERNAL and not any(
            l.kind is LabelKind.UNTRUSTED_ORIGIN for l in labels
        ):
            labels = labels | LabelSet(
                [Label(LabelKind.UNTRUSTED_ORIGIN, source or str(segment_id), Sensitivity.PUBLIC)]
            )
        seg = Segment(
            segment_id=segment_id,
            trust=trust,
            content=content.encode("utf-8") if isinstance(content, str) else content,
            labels=labels,
        )
        self.session.segments.append(seg)
        return seg

    def context_labels(self) -> LabelSet:
        out = EMPTY_LABELS
        for seg in self.session.segments:
            out = out | seg.labels
        return out

    # -- mediation pipeline -------------------------------------------------

    def mediate(self, call: ToolCall) -> Decision:
        """Run the pipeline on one call and append exactly one audit record."""
        if self.session.closed:
            raise SessionClosedError(self.session.session_id)
        td = self.tools.get(call.tool)
        if td is None:
            raise UnknownToolError(call.tool)
        decision = self._decide(call, td)
        if decision.verdict is Verdict.PENDING:
            approval_id = self.request_approval(call, decision.matched_rule)
            decision = Decision(
                verdict=Verdict.PENDING,
                reason_code=decision.reason_code,
                matched_rule=decision.matched_rule,
                approval_id=approval_id,
            )
        self._append_audit(call, decision)
        if decision.verdict is Verdict.PENDING:
            self.session.emit("escalation-created", self.session.pending[decision.approval_id].to_dict())
        self.session.turns[call.task_id] = self.session.turns.get(call.task_id, 0) + 1
        if self.session.mode is Mode.PERMISSIVE:
            self.execute(call, forced=True)
        elif decision.verdict is Verdict.ALLOW:
            self.execute(call)
        else:
            self.session.results.setdefault(call.call_id, ToolResult())
            if decision.verdict is Verdict.PENDING and self.session.auto_approve:
                # Operator-config shortcut; deliberately unreachable from any
                # mediated call, so an agent cannot switch it on.
                self.resolve_approval(decision.approval_id, True, "config:auto-approve")
        return decision

    def request_approval(self, call: ToolCall, matched_rule: Optional[str]) -> str:
        """Open an operator escalation for a held call."""
        approval_id = self.session.next_approval_id()
        self.session.pending[approval_id] = PendingEscalation(
            approval_id=approval_id,
            call=call,
            matched_rule=matched_rule,
            created_seq=self.session._seq + 1,
        )
        return approval_id

    def _decide(self, call: ToolCall, td: Optional[ToolDescriptor]) -> Decision:
        # Stage 1: tamper guard.
        if call.tool in _MUTATING_FS_TOOLS:
            path_leaf = call.leaf("path")
            path = path_leaf.value if path_leaf and isinstance(path_leaf.value, str) else ""
            if self.session.protected.covers(path):
                return Decision(Verdict.DENY, reason_code=REASON_TCB_TAMPER)

        # Stage 2: policy, with trust gating for policy merges.
        if call.tool == "policy.merge":
            escalation = self._check_merge(call)
            if escalation is not None:
                return escalation
        turn = self.session.turns.get(call.task_id, 0)
        pdec = evaluate(self.session.policy, call, turn)
        if pdec.verdict is Verdict.DENY:
            return pdec

        # Operator-wide port clamp (config), independent of per-rule ranges.
        if self.session.safe_port_range is not None:
            port_leaf = call.leaf("port")
            if port_leaf is not None and isinstance(port_leaf.value, int):
                lo, hi = self.session.safe_port_range
                if not (lo <= port_leaf.value <= hi):
                    return Decision(
                        Verdict.DENY,
                        reason_code=REASON_PORT_OUT_OF_RANGE,
                        matched_rule=pdec.matched_rule,
                    )

        # Stage 3: information flow into the target sink.
        if td is not None and td.sink_kind is not None:
            sink = self._sink_for(call, td, pdec.matched_rule)
            labels = propagate_call(call)
            verdict = check_flow(labels, sink)
            if not verdict.allowed:
                return Decision(
                    Verdict.DENY, reason_code=REASON_FLOW_VIOLATION, matched_rule=pdec.matched_rule
                )

        # Stage 4: content scanners.
        findings = self._scan(call, td)
        reason = self._deny_reason(findings)
        if reason is not None:
            return Decision(Verdict.DENY, reason_code=reason, matched_rule=pdec.matched_rule)

        # Stage 5: operator approval.
        if pdec.verdict is Verdict.PENDING:
            return pdec
        return Decision(Verdict.ALLOW, matched_rule=pdec.matched_rule)

    def _check_merge(self, call: ToolCall) -> Optional[Decision]:
        delta_leaf = call.leaf("delta")
        delta_text = delta_leaf.value if delta_leaf and isinstance(delta_leaf.value, str) else ""
        try:
            delta = parse_policy(delta_text)
            merge_policies(self.session.policy, delta, call.origin_trust)
        except PrivilegeEscalationError:
            return Decision(Verdict.DENY, reason_code=REASON_PRIVILEGE_ESCALATION)
        except (PolicySyntaxError, DuplicateRuleIdError):
            return Decision(Verdict.DENY, reason_code=REASON_POLICY_DENY)
        return None

    def _sink_for(self, call: ToolCall, td: ToolDescriptor, matched_rule: Optional[str]) -> SinkDescriptor:
        if td.domain_from is not None:
            leaf = call.leaf(td.domain_from)
            raw = leaf.value if leaf and isinstance(leaf.value, str) else ""
            host = _host_of(raw)
            sink_id = f"{td.sink_id or td.name.split('.')[0]}:{host}"
            clearance = self.session.sink_clearances.get(sink_id)
            if clearance is None:
                clearance = self.session.domain_clearances.get(host, EMPTY_LABELS)
        else:
            sink_id = td.sink_id or td.name
            clearance = self.session.sink_clearances.get(sink_id, EMPTY_LABELS)
        rule_clearance = self._rule_clearance(matched_rule)
        if rule_clearance:
            clearance = clearance | rule_clearance
        return SinkDescriptor(sink_id=sink_id, kind=td.sink_kind, clearance=clearance)

    def _rule_clearance(self, rule_id: Optional[str]) -> LabelSet:
        if rule_id is None:
            return EMPTY_LABELS
        for rule in self.session.policy.rules:
            if rule.rule_id == rule_id and rule.sink_clearance is not None:
                return rule.sink_clearance
        return EMPTY_LABELS

    def _scan(self, call: ToolCall, td: Optional[ToolDescriptor]) -> list[Finding]:
        findings: list[Finding] = []
        registry = self.session.registry
        approved = self.session.approved_domains
        arg_labels = propagate_call(call)
        text_leaves = [
            (path, leaf.value)
            for path, leaf in iter_arg_leaves(call.args)
            if isinstance(leaf.value, str)
        ]
        for _, text in text_leaves:
            findings.extend(scan_unicode_smuggling(text))
            _, ansi = strip_ansi(text)
            findings.extend(ansi)
        profile = td.scan_profile if td is not None else "text"
        if profile == "url":
            url_leaf = call.leaf("url")
            if url_leaf is not None and isinstance(url_leaf.value, str):
                findings.extend(
                    scan_url(
                        url_leaf.value,
                        approved_domains=approved,
                        registry=registry,
                        content_labels=arg_labels,
                    )
                )
        elif profile == "command":
            cmd_leaf = call.leaf("command")
            if cmd_leaf is not None and isinstance(cmd_leaf.value, str):
                argv = _split_command(cmd_leaf.value)
                findings.extend(
                    scan_command(argv, registry=registry, approved_domains=approved)
                )
        elif profile == "markdown":
            md_leaf = call.leaf("markdown")
            if md_leaf is not None and isinstance(md_leaf.value, str):
                untrusted = call.origin_trust is TrustLevel.EXTERNAL or any(
                    l.kind is LabelKind.UNTRUSTED_ORIGIN for l in arg_labels
                )
                findings.extend(
                    scan_markdown_images(
                        md_leaf.value,
                        untrusted_origin=untrusted,
                        approved_domains=approved,
                        registry=registry,
                        content_labels=arg_labels,
                    )
                )
        return findings

    @staticmethod
    def _deny_reason(findings: list[Finding]) -> Optional[str]:
        present = {f.kind for f in findings}
        for kind in DENY_SEVERITY:
            if kind in present:
                return SCANNER_REASONS[kind]
        return None

    # -- execution and approvals --------------------------------------------

    def execute(self, call: ToolCall, forced: bool = False) -> ToolResult:
        """Run the tool's handler against the world and store the result.

        Requires a prior Allow audit record for this exact call_id; that is
        checked here, not assumed, so the executor cannot be reached around
        the monitor.  ``forced`` is the Permissive-mode bypass that exists to
        demonstrate what an unmediated agent would have done.
        """
        if not forced and call.call_id not in self.session._allowed_ids:
            raise NotAuthorizedError(f"no prior Allow for call {call.call_id!r}")
        td = self.tools.get(call.tool)
        if call.tool == "policy.merge":
            result = self._apply_merge(call, forced)
        else:
            if td is None:
                result = ToolResult()
            else:
                try:
                    result = td.handler(self.session.world, call)
                except Exception as e:
                    raise ExecutorFailure(f"{call.tool} handler failed: {e}") from e
        # Taint propagates through the tool: the result carries at least the
        # labels that flowed in through the arguments.
        result = ToolResult(value=result.value, labels=result.labels | propagate_call(call))
        self.session.results[call.call_id] = result
        trust = td.result_trust if td is not None else TrustLevel.USER
        source = f"tool:{call.tool}"
        if td is not None and td.domain_from is not None:
            leaf = call.leaf(td.domain_from)
            if leaf is not None and isinstance(leaf.value, str):
                host = _host_of(leaf.value)
                if host:
                    source = f"web:{host}"
        self.append_content(
            _result_text(result.value), trust, labels=result.labels, source=source
        )
        return result

    def _apply_merge(self, call: ToolCall, forced: bool) -> ToolResult:
        delta_leaf = call.leaf("delta")
        delta_text = delta_leaf.value if delta_leaf and isinstance(delta_leaf.value, str) else ""
        try:
            delta = parse_policy(delta_text)
        except (PolicySyntaxError, DuplicateRuleIdError):
            return ToolResult(value="merge rejected: malformed delta")
        try:
            self.session.policy = merge_policies(self.session.policy, delta, call.origin_trust)
        except PrivilegeEscalationError:
            if not forced:
                return ToolResult(value="merge rejected: privilege escalation")
            # Permissive mode demonstrates the unguarded behavior: splice the
            # delta in as if the trust check did not exist.
            merged = list(self.session.policy.rules) + list(delta.rules)
            seen: set[str] = set()
            out = []
            for r in merged:
                rid = r.rule_id
                n = 2
                while rid in seen:
                    rid = f"{r.rule_id}-m{n}"
                    n += 1
                seen.add(rid)
                out.append(r if rid == r.rule_id else replace(r, rule_id=rid))
            self.session.policy = Policy(rules=tuple(out), metadata=self.session.policy.metadata)
        return ToolResult(value=f"policy now has {len(self.session.policy.rules)} rules")

    def resolve_approval(self, approval_id: str, granted: bool, approver: str = "operator") -> AuditRecord:
        """Resolve a pending escalation; appends the resolution audit record.

        Resolution is write-once: a second attempt raises AlreadyResolvedError.
        """
        esc = self.session.pending.get(approval_id)
        if esc is None:
            raise NoSuchApprovalError(approval_id)
        if esc.status != "pending":
            raise AlreadyResolvedError(f"{approval_id} already {esc.status}")
        if granted:
            decision = Decision(
                Verdict.ALLOW, matched_rule=esc.matched_rule, approval_id=None
            )
            esc.status = "approved"
        else:
            reason = (
                REASON_APPROVAL_MEMORY_WRITE
                if esc.call.tool.split(".")[0] == "memory"
                else REASON_APPROVAL_DENIED
            )
            decision = Decision(
                Verdict.DENY, reason_code=reason, matched_rule=esc.matched_rule
            )
            esc.status = "denied"
        esc.operator = approver
        record = self._append_audit(esc.call, decision)
        esc.resolved_seq = record.seq
        self.session.emit("escalation-resolved", esc.to_dict())
        if granted and self.session.mode is Mode.MONITORED:
            self.execute(esc.call)
        return record

    def _append_audit(self, call: ToolCall, decision: Decision) -> AuditRecord:
        seq = self.session.next_seq()
        record = AuditRecord(
            seq=seq,
            call=call,
            decision=decision,
            label_snapshot=propagate_call(call),
            timestamp=seq,
        )
        self.session.audit.append(record)
        if decision.verdict is Verdict.ALLOW:
            self.session._allowed_ids.add(call.call_id)
        self.session.emit("audit-appended", record.to_dict())
        return record


def _result_text(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, (str, bytes)):
        return value if isinstance(value, str) else value.decode("utf-8", "replace")
    return json.dumps(value, default=str, sort_keys=True)


def _host_of(raw: str) -> str:
    if "://" in raw:
        try:
            return (urlsplit(raw).hostname or "").lower()
        except ValueError:
            return ""
    return raw.lower()


def _split_command(command: str) -> list[str]:
    try:
        return shlex.split(command)
    except ValueError:
        return command.split()


def default_toolset() -> list[ToolDescriptor]:
    return [
        ToolDescriptor("fs.read", sandbox.h_fs_read),
        ToolDescriptor("fs.write", sandbox.h_fs_write, sink_kind=SinkKind.FILE, sink_id="file"),
        ToolDescriptor(
            "net.http_get", sandbox.h_http_get, sink_kind=SinkKind.NETWORK_DOMAIN,
            sink_id="net", domain_from="url", scan_profile="url",
            result_trust=TrustLevel.EXTERNAL,
        ),
        ToolDescriptor(
            "net.http_post", sandbox.h_http_post, sink_kind=SinkKind.NETWORK_DOMAIN,
            sink_id="net", domain_from="url", scan_profile="url",
            result_trust=TrustLevel.EXTERNAL,
        ),
        ToolDescriptor("expose_port", sandbox.h_expose_port),
        ToolDescriptor(
            "shell.exec", sandbox.h_shell_exec, sink_kind=SinkKind.TERMINAL,
            sink_id="shell", scan_profile="command",
        ),
        ToolDescriptor(
            "terminal.print", sandbox.h_terminal_print, sink_kind=SinkKind.TERMINAL, sink_id="terminal"
        ),
        ToolDescriptor(
            "clipboard.write", sandbox.h_clipboard_write, sink_kind=SinkKind.CLIPBOARD, sink_id="clipboard"
        ),
        ToolDescriptor("clipboard.read", sandbox.h_clipboard_read),
        ToolDescriptor(
            "memory.store", sandbox.h_memory_store, sink_kind=SinkKind.MEMORY, sink_id="memory"
        ),
        ToolDescriptor("memory.retrieve", sandbox.h_memory_retrieve),
        ToolDescriptor(
            "browser.open", sandbox.h_browser_open, sink_kind=SinkKind.NETWORK_DOMAIN,
            sink_id="net", domain_from="url", scan_profile="url",
            result_trust=TrustLevel.EXTERNAL,
        ),
        ToolDescriptor(
            "browser.fill", sandbox.h_browser_fill, sink_kind=SinkKind.BROWSER,
            sink_id="browser", domain_from="url", result_trust=TrustLevel.EXTERNAL,
        ),
        ToolDescriptor(
            "browser.exec_script", sandbox.h_browser_exec_script, sink_kind=SinkKind.BROWSER,
            sink_id="browser", domain_from="url", result_trust=TrustLevel.EXTERNAL,
        ),
        ToolDescriptor(
            "ui.render", sandbox.h_ui_render, sink_kind=SinkKind.UI, sink_id="ui", scan_profile="markdown"
        ),
        ToolDescriptor("gitlab.comment", sandbox.h_gitlab_comment, result_trust=TrustLevel.EXTERNAL),
        ToolDescriptor("policy.merge", h_noop),
    ]
