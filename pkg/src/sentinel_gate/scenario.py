"""Scripted attack/benign scenario fixtures and the harness that replays
them through the gateway.

A fixture is a JSON document: seed state (policy, secrets, files, pages),
a list of steps, and the expected outcome.  Steps either extend the agent's
context (``append_segment``), issue a tool call (``tool_call``), resolve a
pending escalation (``approval_script``), or assert on world state
(``expect``).

Argument values may use constructor objects instead of literals so taint
chains stay genuine: ``{"$from_result": "call-1"}`` carries the labels of
that call's result, ``{"$secret": "id"}`` produces the registered secret
with its SecretMaterial label, while ``{"$secret_hex": "id"}`` produces the
encoded form with no label at all, modeling a value that went through the
model and lost its provenance.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .config import OperatorConfig
from .gateway import Gateway, Mode, ProtectedPathSet, SessionContext
from .model import (
    Arg,
    AuditRecord,
    EMPTY_LABELS,
    LabelSet,
    Segment,
    ToolCall,
    TrustLevel,
    Verdict,
)
from .policy import (
    BUILTIN_TEMPLATES,
    TaskTemplate,
    derive_task_policy,
    merge_policies,
    parse_policy,
)
from .sandbox import Page, ToolResult, World

FIXTURES_DIR = Path(__file__).parent / "fixtures"

_STEP_KEYS = ("append_segment", "tool_call", "approval_script", "expect")


class ScenarioFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    title: str
    kind: str  # "attack" | "benign"
    seed: dict
    steps: tuple[dict, ...]
    expected_block_step: Optional[int] = None
    expected_block_reason: Optional[str] = None
    expected_exfil_marker: Optional[str] = None
    family: Optional[str] = None
    description: str = ""


def load_scenario(source: str | Path | dict) -> Scenario:
    """Load and validate one fixture from a path, JSON text, or dict."""
    if isinstance(source, dict):
        doc = source
    else:
        p = Path(source)
        if p.exists():
            doc = json.loads(p.read_text(encoding="utf-8"))
        else:
            doc = json.loads(str(source))
    if not isinstance(doc, dict):
        raise ScenarioFormatError("fixture must be a JSON object")
    for key in ("scenario_id", "title", "kind", "steps"):
        if key not in doc:
            raise ScenarioFormatError(f"fixture missing required field {key!r}")
    if doc["kind"] not in ("attack", "benign"):
        raise ScenarioFormatError(f"kind must be attack or benign, got {doc['kind']!r}")
    steps = doc["steps"]
    if not isinstance(steps, list) or not steps:
        raise ScenarioFormatError("steps must be a non-empty list")
    for i, step in enumerate(steps):
        if not isinstance(step, dict):
            raise ScenarioFormatError(f"step {i + 1} is not an object")
        tags = [k for k in step if k in _STEP_KEYS]
        if len(tags) != 1:
            raise ScenarioFormatError(
                f"step {i + 1} must have exactly one of {_STEP_KEYS}, found {tags}"
            )
    if doc["kind"] == "attack":
        for key in ("expected_block_step", "expected_block_reason", "expected_exfil_marker"):
            if not doc.get(key):
                raise ScenarioFormatError(f"attack fixture missing {key!r}")
    return Scenario(
        scenario_id=doc["scenario_id"],
        title=doc["title"],
        kind=doc["kind"],
        seed=doc.get("seed", {}),
        steps=tuple(steps),
        expected_block_step=doc.get("expected_block_step"),
        expected_block_reason=doc.get("expected_block_reason"),
        expected_exfil_marker=doc.get("expected_exfil_marker"),
        family=doc.get("family"),
        description=doc.get("description", ""),
    )


def fixture_paths() -> list[Path]:
    return sorted(FIXTURES_DIR.glob("*.json"))


def load_builtin_scenarios() -> list[Scenario]:
    return [load_scenario(p) for p in fixture_paths()]


# ---------------------------------------------------------------------------
# Value constructors
# ---------------------------------------------------------------------------

TAG_BASE = 0xE0000


def tags_encode(text: str) -> str:
    """Encode printable ASCII into the Unicode Tags block."""
    return "".join(chr(TAG_BASE + ord(ch)) for ch in text)


def osc52_sequence(payload: str) -> str:
    b64 = base64.b64encode(payload.encode("utf-8")).decode("ascii")
    return f"\x1b]52;c;{b64}\x07"


def static_resolve(spec: Any) -> str:
    """Resolve the session-independent constructors allowed in seed content."""
    if isinstance(spec, str):
        return spec
    if isinstance(spec, dict):
        if "$concat" in spec:
            return "".join(static_resolve(item) for item in spec["$concat"])
        if "$tags" in spec:
            return tags_encode(spec["$tags"])
        if "$osc52" in spec:
            return osc52_sequence(spec["$osc52"])
        if "$sgr" in spec:
            return f"\x1b[32m{spec['$sgr']}\x1b[0m"
    raise ScenarioFormatError(f"seed content supports only literal strings and $concat/$tags/$osc52/$sgr: {spec!r}")


class _Resolver:
    def __init__(self, session: SessionContext, segments: dict[str, Segment]):
        self.session = session
        self.segments = segments

    def resolve(self, spec: Any) -> tuple[Any, LabelSet]:
        """Resolve a fixture value spec into (value, labels)."""
        if not isinstance(spec, dict):
            return spec, EMPTY_LABELS
        if "$concat" in spec:
            parts: list[str] = []
            labels = EMPTY_LABELS
            for item in spec["$concat"]:
                v, l = self.resolve(item)
                parts.append(v if isinstance(v, str) else str(v))
                labels = labels | l
            return "".join(parts), labels
        if "$from_segment" in spec:
            seg = self.segments.get(spec["$from_segment"])
            if seg is None:
                raise ScenarioFormatError(f"unknown segment {spec['$from_segment']!r}")
            return seg.content.decode("utf-8"), seg.labels
        if "$from_result" in spec:
            result = self.session.results.get(spec["$from_result"], ToolResult())
            return result.value, result.labels
        if "$from_clipboard" in spec:
            cell = self.session.world.clipboard
            return cell.value, cell.labels
        if "$from_memory" in spec:
            cell = self.session.world.memory.retrieve(spec["$from_memory"])
            return cell.value, cell.labels
        if "$secret" in spec:
            sid = spec["$secret"]
            reg = self.session.registry
            value = reg.raw_value(sid).decode("utf-8", "surrogateescape")
            return value, LabelSet([reg.label_for(sid)])
        if "$secret_hex" in spec or "$secret_b64" in spec:
            key = "$secret_hex" if "$secret_hex" in spec else "$secret_b64"
            encoding = "hex" if key == "$secret_hex" else "base64"
            sid = spec[key]
            encoded = self.session.registry.variants(sid)[encoding]
            value = spec.get("prefix", "") + encoded + spec.get("suffix", "")
            # Deliberately unlabeled: the value was retyped by the model, so
            # provenance is gone and only content scanning can catch it.
            return value, EMPTY_LABELS
        if "$tags" in spec:
            return tags_encode(spec["$tags"]), EMPTY_LABELS
        if "$osc52" in spec:
            return osc52_sequence(spec["$osc52"]), EMPTY_LABELS
        if "$sgr" in spec:
            return f"\x1b[32m{spec['$sgr']}\x1b[0m", EMPTY_LABELS
        return spec, EMPTY_LABELS


# ---------------------------------------------------------------------------
# World / session construction
# ---------------------------------------------------------------------------

def _labels(items: Optional[list]) -> LabelSet:
    return LabelSet.from_list(items or [])


def build_session(
    scenario: Scenario, mode: Mode, config: Optional[OperatorConfig] = None
) -> tuple[SessionContext, Gateway, Optional[str]]:
    seed = scenario.seed
    world = World()
    for sid, value in (seed.get("secrets") or {}).items():
        world.registry.register_secret(value, sid)
    for path, entry in (seed.get("files") or {}).items():
        world.fs.write(path, static_resolve(entry.get("content", "")), _labels(entry.get("labels")))
    for url, page in (seed.get("pages") or {}).items():
        world.net.seed_page(url, Page(static_resolve(page.get("content", "")), _labels(page.get("labels"))))
    for key, entry in (seed.get("memory") or {}).items():
        world.memory.store(key, static_resolve(entry.get("content", "")), _labels(entry.get("labels")))
    clip = seed.get("clipboard")
    if clip:
        world.clipboard.value = static_resolve(clip.get("value", ""))
        world.clipboard.labels = _labels(clip.get("labels"))
    for key, value in (seed.get("storage") or {}).items():
        world.browser.storage[key] = value

    policy = parse_policy(seed.get("policy", ""))
    task_id: Optional[str] = None
    task = seed.get("task")
    if task:
        if "template" in task:
            tpl = BUILTIN_TEMPLATES.get(task["template"])
            if tpl is None:
                raise ScenarioFormatError(f"unknown task template {task['template']!r}")
        else:
            tpl = TaskTemplate.from_dict(task["template_def"])
        derived, task_id = derive_task_policy(tpl, task.get("bindings", {}))
        policy = merge_policies(policy, derived, TrustLevel.SYSTEM)

    domain_clearances = {
        host.lower(): _labels(ls) for host, ls in (seed.get("domain_clearances") or {}).items()
    }
    sink_clearances = {
        sink: _labels(ls) for sink, ls in (seed.get("sink_clearances") or {}).items()
    }
    protected_prefixes = tuple(seed.get("protected_paths", ("/agent",)))
    approved = set(seed.get("approved_domains", ()))
    safe_ports: Optional[tuple[int, int]] = None
    auto_approve = False
    if config is not None:
        protected_prefixes = protected_prefixes + tuple(config.protected_paths)
        approved |= set(config.approved_domains)
        safe_ports = config.safe_port_range
        auto_approve = config.auto_approve
    session = SessionContext(
        session_id=scenario.scenario_id,
        policy=policy,
        world=world,
        mode=mode,
        protected=ProtectedPathSet(protected_prefixes),
        approved_domains=approved,
        domain_clearances=domain_clearances,
        sink_clearances=sink_clearances,
        safe_port_range=safe_ports,
        auto_approve=auto_approve,
    )
    gw = Gateway(session)
    gw.register_default_tools()
    return session, gw, task_id


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------

@dataclass
class StepOutcome:
    step: int
    kind: str
    detail: str
    verdict: Optional[str] = None
    reason: Optional[str] = None
    ok: bool = True

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "kind": self.kind,
            "detail": self.detail,
            "verdict": self.verdict,
            "reason": self.reason,
            "ok": self.ok,
        }


@dataclass
class Report:
    scenario_id: str
    kind: str
    mode: str
    steps_run: int
    denials: int
    blocked_step: Optional[int]
    blocked_reason: Optional[str]
    exfil_observed: bool
    audit_digest: str
    expect_failures: int
    step_outcomes: list[StepOutcome] = field(default_factory=list)
    records: list[AuditRecord] = field(default_factory=list)
    expected_block_step: Optional[int] = None
    expected_block_reason: Optional[str] = None
    expected_exfil_marker: Optional[str] = None

    @property
    def block_matches_expectation(self) -> bool:
        return (
            self.blocked_step == self.expected_block_step
            and self.blocked_reason == self.expected_block_reason
        )

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "kind": self.kind,
            "mode": self.mode,
            "steps_run": self.steps_run,
            "denials": self.denials,
            "blocked_step": self.blocked_step,
            "blocked_reason": self.blocked_reason,
            "exfil_observed": self.exfil_observed,
            "audit_digest": self.audit_digest,
            "expect_failures": self.expect_failures,
            "expected_block_step": self.expected_block_step,
            "expected_block_reason": self.expected_block_reason,
            "expected_exfil_marker": self.expected_exfil_marker,
            "steps": [s.to_dict() for s in self.step_outcomes],
        }


class _StepRunner:
    """Executes fixture steps one at a time, keeping the resolver state."""

    def __init__(
        self,
        scenario: Scenario,
        session: SessionContext,
        gw: Gateway,
        default_task: str,
        mode: Mode,
    ):
        self.scenario = scenario
        self.session = session
        self.gw = gw
        self.default_task = default_task
        self.mode = mode
        self.segments: dict[str, Segment] = {}
        self.resolver = _Resolver(session, self.segments)
        self.call_step: dict[str, int] = {}
        self.outcomes: list[StepOutcome] = []
        self._call_counter = 0

    def run_step(self, index: int, step: dict, skip_approvals: bool = False) -> StepOutcome:
        if "append_segment" in step:
            spec = step["append_segment"]
            content, extra = self.resolver.resolve(spec.get("content", ""))
            trust = TrustLevel.from_wire(spec.get("trust", "User"))
            labels = _labels(spec.get("labels")) | extra
            seg = self.gw.append_content(
                content,
                trust,
                labels=labels,
                source=spec.get("source", spec["segment_id"]),
                segment_id=spec["segment_id"],
            )
            self.segments[seg.segment_id] = seg
            outcome = StepOutcome(index, "append_segment", str(seg.segment_id))
        elif "tool_call" in step:
            spec = step["tool_call"]
            self._call_counter += 1
            call_id = spec.get("call_id", f"call-{self._call_counter}")
            args = _build_args(spec.get("args", {}), self.resolver)
            call = ToolCall(
                call_id=call_id,
                tool=spec["tool"],
                args=args,
                origin_trust=TrustLevel.from_wire(spec.get("origin_trust", "User")),
                task_id=spec.get("task_id", self.default_task),
            )
            self.call_step[call_id] = index
            decision = self.gw.mediate(call)
            outcome = StepOutcome(
                index,
                "tool_call",
                f"{call.tool} ({call_id})",
                verdict=decision.verdict.value,
                reason=decision.reason_code,
            )
        elif "approval_script" in step:
            if skip_approvals:
                outcome = StepOutcome(index, "approval_script", "left to live operator")
            else:
                outcome = self._run_approval(index, step["approval_script"])
        elif "expect" in step:
            if self.mode is Mode.PERMISSIVE:
                # Expectations describe the monitored steady state; in
                # Permissive mode the point is to observe the leak instead.
                outcome = StepOutcome(index, "expect", "skipped (permissive)")
            else:
                ok, detail = _check_expect(step["expect"], self.session)
                outcome = StepOutcome(index, "expect", detail, ok=ok)
        else:  # pragma: no cover - load_scenario validates step shape
            raise ScenarioFormatError(f"step {index} has no recognized key")
        self.outcomes.append(outcome)
        return outcome

    def _run_approval(self, index: int, spec: dict) -> StepOutcome:
        approval_id = spec.get("approval_id", "latest")
        if approval_id == "latest":
            pending_ids = [a for a, e in self.session.pending.items() if e.status == "pending"]
            if not pending_ids:
                return StepOutcome(index, "approval_script", "no pending escalation", ok=False)
            approval_id = pending_ids[-1]
        granted = spec.get("decision", "deny") == "approve"
        record = self.gw.resolve_approval(approval_id, granted, spec.get("operator", "operator"))
        return StepOutcome(
            index,
            "approval_script",
            f"{approval_id}: {'approved' if granted else 'denied'}",
            verdict=record.decision.verdict.value,
            reason=record.decision.reason_code,
        )


def run_steps(
    scenario: Scenario,
    session: SessionContext,
    gw: Gateway,
    default_task: str,
    mode: Mode,
    skip_approvals: bool = False,
) -> tuple[list[StepOutcome], dict[str, int]]:
    """Drive a scenario's steps against an existing session.

    ``skip_approvals`` leaves approval_script steps unexecuted so a live
    operator (serve mode) can resolve the escalations instead.
    """
    runner = _StepRunner(scenario, session, gw, default_task, mode)
    for index, step in enumerate(scenario.steps, start=1):
        runner.run_step(index, step, skip_approvals)
    return runner.outcomes, runner.call_step


class ReplayDriver:
    """Steps a fixture forward for serve mode.

    Pending calls block the session's call stream: the driver stops right
    after a tool call opens an escalation and continues only when the
    operator has resolved it (in either direction). The fixture's own
    approval_script steps are skipped; the live operator plays that part.
    """

    def __init__(self, scenario: Scenario, session: SessionContext, gw: Gateway, default_task: str):
        self._runner = _StepRunner(scenario, session, gw, default_task, Mode.MONITORED)
        self._steps = list(enumerate(scenario.steps, start=1))
        self._pos = 0

    @property
    def outcomes(self) -> list[StepOutcome]:
        return self._runner.outcomes

    @property
    def finished(self) -> bool:
        return self._pos >= len(self._steps)

    def _blocked(self) -> bool:
        return any(e.status == "pending" for e in self._runner.session.pending.values())

    def run_until_blocked(self) -> list[StepOutcome]:
        ran: list[StepOutcome] = []
        while self._pos < len(self._steps) and not self._blocked():
            index, step = self._steps[self._pos]
            outcome = self._runner.run_step(index, step, skip_approvals=True)
            ran.append(outcome)
            self._pos += 1
        return ran

    def resume(self) -> list[StepOutcome]:
        """Continue after an approval resolution; no-op while still blocked."""
        if self._blocked():
            return []
        return self.run_until_blocked()


def run_scenario(
    scenario: Scenario, mode: Mode = Mode.MONITORED, config: Optional[OperatorConfig] = None
) -> Report:
    """Replay a fixture and report what the monitor decided and what leaked."""
    session, gw, task_id = build_session(scenario, mode, config)
    default_task = task_id or scenario.scenario_id
    outcomes, call_step = run_steps(scenario, session, gw, default_task, mode)

    deny_records = [r for r in session.audit if r.decision.verdict is Verdict.DENY]
    blocked_step = None
    blocked_reason = None
    if deny_records:
        first = min(deny_records, key=lambda r: r.seq)
        blocked_step = call_step.get(first.call.call_id)
        blocked_reason = first.decision.reason_code
    marker = scenario.expected_exfil_marker
    return Report(
        scenario_id=scenario.scenario_id,
        kind=scenario.kind,
        mode=mode.value,
        steps_run=len(scenario.steps),
        denials=len(deny_records),
        blocked_step=blocked_step,
        blocked_reason=blocked_reason,
        exfil_observed=session.world.net.observed(marker) if marker else False,
        audit_digest=session.audit_digest(),
        expect_failures=sum(1 for o in outcomes if not o.ok),
        step_outcomes=outcomes,
        records=list(session.audit),
        expected_block_step=scenario.expected_block_step,
        expected_block_reason=scenario.expected_block_reason,
        expected_exfil_marker=marker,
    )


def _build_args(spec: dict, resolver: _Resolver) -> dict:
    def walk(node: Any) -> Any:
        if isinstance(node, dict) and "value" in node:
            value, derived = resolver.resolve(node["value"])
            labels = _labels(node.get("labels")) | derived
            return Arg(value=value, labels=labels)
        if isinstance(node, dict):
            return {k: walk(v) for k, v in node.items()}
        if isinstance(node, list):
            return [walk(v) for v in node]
        raise ScenarioFormatError(f"argument leaves must be objects with a 'value': {node!r}")

    return {k: walk(v) for k, v in spec.items()}


def _check_expect(spec: dict, session: SessionContext) -> tuple[bool, str]:
    world = session.world
    checks: list[tuple[bool, str]] = []
    if "clipboard_contains" in spec:
        needle = spec["clipboard_contains"]
        checks.append((needle in world.clipboard.value, f"clipboard contains {needle!r}"))
    if "clipboard_equals" in spec:
        want = spec["clipboard_equals"]
        checks.append((world.clipboard.value == want, f"clipboard equals {want!r}"))
    if "terminal_contains" in spec:
        needle = spec["terminal_contains"]
        joined = "\n".join(world.terminal.lines)
        checks.append((needle in joined, f"terminal contains {needle!r}"))
    if "file_exists" in spec:
        checks.append((world.fs.exists(spec["file_exists"]), f"file {spec['file_exists']} exists"))
    if "file_absent" in spec:
        checks.append((not world.fs.exists(spec["file_absent"]), f"file {spec['file_absent']} absent"))
    if "file_contains" in spec:
        path, needle = spec["file_contains"]["path"], spec["file_contains"]["needle"]
        content = world.fs.files[path].content if world.fs.exists(path) else ""
        checks.append((needle in content, f"file {path} contains {needle!r}"))
    if "file_lacks" in spec:
        path, needle = spec["file_lacks"]["path"], spec["file_lacks"]["needle"]
        content = world.fs.files[path].content if world.fs.exists(path) else ""
        checks.append((needle not in content, f"file {path} lacks {needle!r}"))
    if "memory_has" in spec:
        checks.append(
            (spec["memory_has"] in world.memory.entries, f"memory has {spec['memory_has']!r}")
        )
    if "memory_empty" in spec:
        checks.append((not world.memory.entries, "memory empty"))
    if "ui_rendered" in spec:
        n = spec["ui_rendered"]
        checks.append(
            (len(world.ui.rendered) == n, f"ui rendered {n} documents (actual {len(world.ui.rendered)})")
        )
    if "policy_rule_count" in spec:
        checks.append(
            (len(session.policy.rules) == spec["policy_rule_count"],
             f"policy has {spec['policy_rule_count']} rules (actual {len(session.policy.rules)})")
        )
    if not checks:
        return False, f"expect step with no recognized checks: {sorted(spec)}"
    ok = all(c for c, _ in checks)
    return ok, "; ".join(d for _, d in checks)
