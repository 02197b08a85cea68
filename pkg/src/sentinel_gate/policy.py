"""Default-deny security policies: a small text DSL, first-match evaluation,
task-template instantiation, and trust-gated merging.

Grammar (one rule per line by convention, free-form in practice)::

    policy     := rule*
    rule       := effect glob constraint* clause*
    effect     := "allow" | "deny" | "require-approval"
    constraint := "path_prefix" STR
                | "domain_in" "{" STR ("," STR)* "}"
                | "port_range" INT ".." INT
                | "issue_id" INT
                | "value_equals" IDENT STR
    clause     := "scope" STR | "expires" INT | "clearance" "{" label* "}"
                | "id" STR
    label      := KIND STR SENSITIVITY          # e.g. ToolOutput "*" Public

Comments run from ``#`` to end of line.  A leading ``# policy: NAME VERSION``
comment carries the policy metadata so serialization round-trips.  Globs match
dotted tool names: ``*`` is exactly one component, a trailing ``**`` is any
suffix.  Rule ids default to their 1-based position (``rule-N``); the ``id``
clause overrides.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Iterable, Optional
from urllib.parse import urlsplit

from .model import (
    Decision,
    Label,
    LabelKind,
    LabelSet,
    Sensitivity,
    ToolCall,
    TrustLevel,
    Verdict,
)

# Reason codes produced by evaluation (see the gateway for the full closed set).
REASON_DEFAULT_DENY = "default-deny"
REASON_PORT_OUT_OF_RANGE = "port-out-of-range"
REASON_POLICY_DENY = "policy-deny"
REASON_APPROVAL_REQUIRED = "approval:required"

# Placeholder approval id on Pending decisions coming straight out of
# evaluate(); the gateway substitutes the real escalation id.
APPROVAL_UNASSIGNED = "unassigned"

DEFAULT_POLICY_NAME = "policy"
DEFAULT_POLICY_VERSION = "1"


class PolicySyntaxError(ValueError):
    """DSL parse failure, with 1-based line and column."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class DuplicateRuleIdError(ValueError):
    pass


class MissingBindingError(KeyError):
    pass


class TypeMismatchError(TypeError):
    pass


class PrivilegeEscalationError(PermissionError):
    """An External-trust delta tried to widen privilege."""


class Effect(Enum):
    ALLOW = "allow"
    DENY = "deny"
    REQUIRE_APPROVAL = "require-approval"


# ---------------------------------------------------------------------------
# Matchers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathPrefix:
    prefix: str


@dataclass(frozen=True)
class DomainIn:
    domains: frozenset[str]

    def __post_init__(self) -> None:
        for d in self.domains:
            if d != d.lower() or "://" in d or "/" in d:
                raise ValueError(f"domain_in entry must be lowercase host only: {d!r}")


@dataclass(frozen=True)
class PortRange:
    lo: int
    hi: int

    def __post_init__(self) -> None:
        if not (1 <= self.lo <= self.hi <= 65535):
            raise ValueError(f"port_range must satisfy 1 <= lo <= hi <= 65535: {self.lo}..{self.hi}")


@dataclass(frozen=True)
class IssueId:
    value: int


@dataclass(frozen=True)
class ValueEquals:
    name: str
    value: str


Constraint = Any  # PathPrefix | DomainIn | PortRange | IssueId | ValueEquals


def tool_glob_match(glob: str, tool: str) -> bool:
    """Match a dotted glob against a dotted tool name.

    ``*`` matches exactly one component; a final ``**`` matches any suffix,
    including the empty one.
    """
    gparts = glob.split(".")
    tparts = tool.split(".")
    if gparts[-1] == "**":
        head = gparts[:-1]
        if len(tparts) < len(head):
            return False
        return all(g == "*" or g == t for g, t in zip(head, tparts))
    if len(gparts) != len(tparts):
        return False
    return all(g == "*" or g == t for g, t in zip(gparts, tparts))


_GLOB_COMPONENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_-]*$")


def _validate_glob(glob: str) -> None:
    parts = glob.split(".")
    for i, part in enumerate(parts):
        if part == "*":
            continue
        if part == "**":
            if i != len(parts) - 1:
                raise ValueError(f"'**' is only valid as the final component: {glob!r}")
            continue
        if not _GLOB_COMPONENT_RE.match(part):
            raise ValueError(f"bad glob component {part!r} in {glob!r}")


def _arg_str(call: ToolCall, name: str) -> Optional[str]:
    leaf = call.leaf(name)
    if leaf is not None and isinstance(leaf.value, str):
        return leaf.value
    return None


def _arg_int(call: ToolCall, name: str) -> Optional[int]:
    leaf = call.leaf(name)
    if leaf is not None and isinstance(leaf.value, int) and not isinstance(leaf.value, bool):
        return leaf.value
    return None


def _call_host(call: ToolCall) -> Optional[str]:
    for name in ("domain", "host"):
        v = _arg_str(call, name)
        if v is not None:
            return v.lower()
    url = _arg_str(call, "url")
    if url is not None:
        host = urlsplit(url).hostname
        return host.lower() if host else None
    return None


def _call_issue_ids(call: ToolCall) -> set[int]:
    ids: set[int] = set()
    for name in ("issue_id", "issue"):
        v = _arg_int(call, name)
        if v is not None:
            ids.add(v)
    url = _arg_str(call, "url")
    if url is not None:
        for seg in urlsplit(url).path.split("/"):
            if seg.isdigit():
                ids.add(int(seg))
    return ids


@dataclass(frozen=True)
class Matcher:
    """Tool glob plus argument constraints; a missing subject argument never matches."""

    tool_glob: str
    constraints: tuple[Constraint, ...] = ()

    def __post_init__(self) -> None:
        _validate_glob(self.tool_glob)

    def matches_tool(self, tool: str) -> bool:
        return tool_glob_match(self.tool_glob, tool)

    def _constraint_ok(self, c: Constraint, call: ToolCall) -> bool:
        if isinstance(c, PathPrefix):
            path = _arg_str(call, "path")
            return path is not None and path.startswith(c.prefix)
        if isinstance(c, DomainIn):
            host = _call_host(call)
            return host is not None and host in c.domains
        if isinstance(c, PortRange):
            port = _arg_int(call, "port")
            return port is not None and c.lo <= port <= c.hi
        if isinstance(c, IssueId):
            return c.value in _call_issue_ids(call)
        if isinstance(c, ValueEquals):
            v = call.leaf(c.name)
            return v is not None and str(v.value) == c.value
        raise TypeError(f"unknown constraint: {c!r}")

    def match(self, call: ToolCall) -> tuple[bool, bool]:
        """Return (matched, port_range_was_sole_failure).

        The second flag feeds the evaluator's reason enrichment: it is set
        when the glob and every non-port constraint held but an in-call port
        fell outside a port_range constraint.
        """
        if not self.matches_tool(call.tool):
            return False, False
        port_failed = False
        others_failed = False
        for c in self.constraints:
            if self._constraint_ok(c, call):
                continue
            if isinstance(c, PortRange) and _arg_int(call, "port") is not None:
                port_failed = True
            else:
                others_failed = True
        if port_failed or others_failed:
            return False, port_failed and not others_failed
        return True, False


# ---------------------------------------------------------------------------
# Rules and policies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolicyRule:
    rule_id: str
    effect: Effect
    matcher: Matcher
    sink_clearance: Optional[LabelSet] = None
    scope: Optional[str] = None
    expiry_turns: Optional[int] = None

    def __post_init__(self) -> None:
        if self.expiry_turns is not None and self.expiry_turns <= 0:
            raise ValueError("expiry_turns must be positive")


@dataclass(frozen=True)
class PolicyMeta:
    name: str = DEFAULT_POLICY_NAME
    version: str = DEFAULT_POLICY_VERSION


@dataclass(frozen=True)
class Policy:
    rules: tuple[PolicyRule, ...] = ()
    metadata: PolicyMeta = PolicyMeta()

    def __post_init__(self) -> None:
        ids = [r.rule_id for r in self.rules]
        if len(ids) != len(set(ids)):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise DuplicateRuleIdError(f"duplicate rule id: {dup!r}")


EMPTY_POLICY = Policy()


def evaluate(policy: Policy, call: ToolCall, turn: int = 0) -> Decision:
    """First-match evaluation; Deny("default-deny") when nothing matches.

    ``turn`` is the number of mediated calls already made in the call's task
    scope; rules with ``expiry_turns`` are skipped once it is used up.  A
    Pending decision carries the APPROVAL_UNASSIGNED placeholder until the
    gateway opens the escalation.
    """
    port_near_miss = False
    for rule in policy.rules:
        if rule.scope is not None and rule.scope != call.task_id:
            continue
        if rule.expiry_turns is not None and turn >= rule.expiry_turns:
            continue
        matched, port_only = rule.matcher.match(call)
        if port_only:
            port_near_miss = True
        if not matched:
            continue
        if rule.effect is Effect.ALLOW:
            return Decision(Verdict.ALLOW, matched_rule=rule.rule_id)
        if rule.effect is Effect.DENY:
            return Decision(Verdict.DENY, reason_code=REASON_POLICY_DENY, matched_rule=rule.rule_id)
        return Decision(
            Verdict.PENDING,
            reason_code=REASON_APPROVAL_REQUIRED,
            matched_rule=rule.rule_id,
            approval_id=APPROVAL_UNASSIGNED,
        )
    reason = REASON_PORT_OUT_OF_RANGE if port_near_miss else REASON_DEFAULT_DENY
    return Decision(Verdict.DENY, reason_code=reason)


def merge_policies(base: Policy, delta: Policy, source_trust: TrustLevel) -> Policy:
    """Merge a policy delta under trust gating.

    User- or System-trust deltas append their rules after the base (still
    ahead of the implicit default-deny).  External-trust deltas may only
    narrow: Deny rules are prepended so they take first-match precedence;
    any Allow or RequireApproval rule raises PrivilegeEscalationError.
    """
    if source_trust is TrustLevel.EXTERNAL:
        widening = [r.rule_id for r in delta.rules if r.effect is not Effect.DENY]
        if widening:
            raise PrivilegeEscalationError(
                f"External-trust delta may not widen privilege (rules: {', '.join(widening)})"
            )
        incoming = list(delta.rules)
        merged = incoming + list(base.rules)
    else:
        incoming = list(delta.rules)
        merged = list(base.rules) + incoming

    taken = set()
    out = []
    for r in merged:
        rid = r.rule_id
        n = 2
        while rid in taken:
            rid = f"{r.rule_id}-m{n}"
            n += 1
        taken.add(rid)
        out.append(r if rid == r.rule_id else replace(r, rule_id=rid))
    return Policy(rules=tuple(out), metadata=base.metadata)


# ---------------------------------------------------------------------------
# Task templates
# ---------------------------------------------------------------------------

_PLACEHOLDER_RE = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


def _placeholders_in(node: Any) -> set[str]:
    found: set[str] = set()
    if isinstance(node, str):
        found.update(_PLACEHOLDER_RE.findall(node))
    elif isinstance(node, dict):
        for v in node.values():
            found |= _placeholders_in(v)
    elif isinstance(node, (list, tuple)):
        for v in node:
            found |= _placeholders_in(v)
    return found


@dataclass(frozen=True)
class TaskTemplate:
    """Rule skeletons with named placeholders, instantiated per task.

    Skeleton rules use the serialized-dict shape (see ``rule_to_dict``); any
    string may embed ``{param}`` placeholders, and an int-valued position may
    be the single placeholder string to take an integer binding.
    """

    template_id: str
    params: tuple[str, ...]
    rule_skeletons: tuple[dict, ...]

    def __post_init__(self) -> None:
        used = _placeholders_in(list(self.rule_skeletons))
        undeclared = used - set(self.params)
        if undeclared:
            raise ValueError(f"placeholders not declared as params: {sorted(undeclared)}")

    @classmethod
    def from_dict(cls, d: dict) -> "TaskTemplate":
        return cls(
            template_id=d["template_id"],
            params=tuple(d.get("params", ())),
            rule_skeletons=tuple(d["rules"]),
        )


def _subst(node: Any, bindings: dict[str, Any]) -> Any:
    if isinstance(node, str):
        m = _PLACEHOLDER_RE.fullmatch(node)
        if m:
            name = m.group(1)
            if name not in bindings:
                raise MissingBindingError(name)
            return bindings[name]

        def repl(m: re.Match) -> str:
            name = m.group(1)
            if name not in bindings:
                raise MissingBindingError(name)
            return str(bindings[name])

        return _PLACEHOLDER_RE.sub(repl, node)
    if isinstance(node, dict):
        return {k: _subst(v, bindings) for k, v in node.items()}
    if isinstance(node, (list, tuple)):
        return [_subst(v, bindings) for v in node]
    return node


def _require_int(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeMismatchError(f"{where} requires an integer, got {value!r}")
    return value


def rule_from_dict(d: dict, default_id: str) -> PolicyRule:
    constraints: list[Constraint] = []
    for c in d.get("constraints", ()):
        if "path_prefix" in c:
            constraints.append(PathPrefix(str(c["path_prefix"])))
        elif "domain_in" in c:
            constraints.append(DomainIn(frozenset(str(x).lower() for x in c["domain_in"])))
        elif "port_range" in c:
            lo, hi = c["port_range"]
            constraints.append(PortRange(_require_int(lo, "port_range"), _require_int(hi, "port_range")))
        elif "issue_id" in c:
            constraints.append(IssueId(_require_int(c["issue_id"], "issue_id")))
        elif "value_equals" in c:
            name, value = c["value_equals"]
            constraints.append(ValueEquals(str(name), str(value)))
        else:
            raise ValueError(f"unknown constraint dict: {c!r}")
    clearance = None
    if d.get("clearance") is not None:
        clearance = LabelSet.from_list(d["clearance"])
    expires = d.get("expires")
    return PolicyRule(
        rule_id=str(d.get("id") or default_id),
        effect=Effect(d["effect"]),
        matcher=Matcher(tool_glob=str(d["tool"]), constraints=tuple(constraints)),
        sink_clearance=clearance,
        scope=d.get("scope"),
        expiry_turns=_require_int(expires, "expires") if expires is not None else None,
    )


def rule_to_dict(rule: PolicyRule) -> dict:
    constraints: list[dict] = []
    for c in rule.matcher.constraints:
        if isinstance(c, PathPrefix):
            constraints.append({"path_prefix": c.prefix})
        elif isinstance(c, DomainIn):
            constraints.append({"domain_in": sorted(c.domains)})
        elif isinstance(c, PortRange):
            constraints.append({"port_range": [c.lo, c.hi]})
        elif isinstance(c, IssueId):
            constraints.append({"issue_id": c.value})
        elif isinstance(c, ValueEquals):
            constraints.append({"value_equals": [c.name, c.value]})
    return {
        "id": rule.rule_id,
        "effect": rule.effect.value,
        "tool": rule.matcher.tool_glob,
        "constraints": constraints,
        "clearance": rule.sink_clearance.to_list() if rule.sink_clearance is not None else None,
        "scope": rule.scope,
        "expires": rule.expiry_turns,
    }


def stable_task_id(template_id: str, bindings: dict[str, Any]) -> str:
    digest = hashlib.sha256(json.dumps(bindings, sort_keys=True, default=str).encode()).hexdigest()
    return f"task-{template_id}-{digest[:8]}"


def derive_task_policy(
    tpl: TaskTemplate,
    bindings: dict[str, Any],
    task_id: Optional[str] = None,
) -> tuple[Policy, str]:
    """Instantiate a template into a task-scoped policy.

    Substitution is purely syntactic.  Every derived rule is scoped to the
    task id (callers may pass one; otherwise it is derived deterministically
    from the template id and bindings).
    """
    missing = [p for p in tpl.params if p not in bindings]
    if missing:
        raise MissingBindingError(missing[0])
    tid = task_id or stable_task_id(tpl.template_id, bindings)
    rules = []
    for i, skel in enumerate(tpl.rule_skeletons):
        concrete = _subst(dict(skel), bindings)
        rule = rule_from_dict(concrete, default_id=f"{tpl.template_id}-{i + 1}")
        if rule.scope is None:
            rule = replace(rule, scope=tid)
        rules.append(rule)
    return Policy(rules=tuple(rules), metadata=PolicyMeta(name=tpl.template_id)), tid


# ---------------------------------------------------------------------------
# DSL lexer / parser
# ---------------------------------------------------------------------------

_EFFECT_WORDS = {e.value: e for e in Effect}
_CONSTRAINT_WORDS = {"path_prefix", "domain_in", "port_range", "issue_id", "value_equals"}
_CLAUSE_WORDS = {"scope", "expires", "clearance", "id"}
_LABEL_KINDS = {k.value: k for k in LabelKind}
_SENSITIVITIES = {s.value: s for s in Sensitivity}

_META_RE = re.compile(r"^#\s*policy:\s*(\S+)\s+(\S+)\s*$")


@dataclass(frozen=True)
class _Tok:
    kind: str  # WORD | INT | STR | LBRACE | RBRACE | COMMA | RANGE
    text: str
    line: int
    col: int


_WORD_START = re.compile(r"[A-Za-z_*]")
_WORD_BODY = re.compile(r"[A-Za-z0-9_.*-]")


def _lex(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch == "{":
            toks.append(_Tok("LBRACE", "{", start_line, start_col))
            i += 1
            col += 1
            continue
        if ch == "}":
            toks.append(_Tok("RBRACE", "}", start_line, start_col))
            i += 1
            col += 1
            continue
        if ch == ",":
            toks.append(_Tok("COMMA", ",", start_line, start_col))
            i += 1
            col += 1
            continue
        if text.startswith("..", i):
            toks.append(_Tok("RANGE", "..", start_line, start_col))
            i += 2
            col += 2
            continue
        if ch == '"':
            i += 1
            col += 1
            buf = []
            while True:
                if i >= n or text[i] == "\n":
                    raise PolicySyntaxError("unterminated string", start_line, start_col)
                c = text[i]
                if c == "\\":
                    if i + 1 >= n:
                        raise PolicySyntaxError("dangling escape", line, col)
                    nxt = text[i + 1]
                    if nxt not in ('"', "\\"):
                        raise PolicySyntaxError(f"unknown escape \\{nxt}", line, col)
                    buf.append(nxt)
                    i += 2
                    col += 2
                    continue
                if c == '"':
                    i += 1
                    col += 1
                    break
                buf.append(c)
                i += 1
                col += 1
            toks.append(_Tok("STR", "".join(buf), start_line, start_col))
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(_Tok("INT", text[i:j], start_line, start_col))
            col += j - i
            i = j
            continue
        if _WORD_START.match(ch):
            j = i
            while j < n and _WORD_BODY.match(text[j]):
                j += 1
            toks.append(_Tok("WORD", text[i:j], start_line, start_col))
            col += j - i
            i = j
            continue
        raise PolicySyntaxError(f"unexpected character {ch!r}", start_line, start_col)
    return toks


class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.pos = 0

    def peek(self) -> Optional[_Tok]:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def next(self, kind: Optional[str] = None, what: str = "token") -> _Tok:
        tok = self.peek()
        if tok is None:
            last = self.toks[-1] if self.toks else _Tok("", "", 1, 1)
            raise PolicySyntaxError(f"expected {what}, found end of input", last.line, last.col)
        if kind is not None and tok.kind != kind:
            raise PolicySyntaxError(f"expected {what}, found {tok.text!r}", tok.line, tok.col)
        self.pos += 1
        return tok

    def parse_policy(self, meta: PolicyMeta) -> Policy:
        raw_rules: list[tuple[Optional[str], Effect, Matcher, Optional[LabelSet], Optional[str], Optional[int]]] = []
        while self.peek() is not None:
            raw_rules.append(self.parse_rule())
        rules = []
        seen: set[str] = set()
        for idx, (explicit_id, effect, matcher, clearance, scope, expires) in enumerate(raw_rules):
            rid = explicit_id or f"rule-{idx + 1}"
            if rid in seen:
                raise DuplicateRuleIdError(f"duplicate rule id: {rid!r}")
            seen.add(rid)
            rules.append(
                PolicyRule(
                    rule_id=rid,
                    effect=effect,
                    matcher=matcher,
                    sink_clearance=clearance,
                    scope=scope,
                    expiry_turns=expires,
                )
            )
        return Policy(rules=tuple(rules), metadata=meta)

    def parse_rule(self):
        tok = self.next("WORD", "effect keyword")
        if tok.text not in _EFFECT_WORDS:
            raise PolicySyntaxError(f"expected allow/deny/require-approval, found {tok.text!r}", tok.line, tok.col)
        effect = _EFFECT_WORDS[tok.text]
        glob_tok = self.next("WORD", "tool glob")
        try:
            _validate_glob(glob_tok.text)
        except ValueError as e:
            raise PolicySyntaxError(str(e), glob_tok.line, glob_tok.col) from None
        constraints: list[Constraint] = []
        clearance: Optional[LabelSet] = None
        scope: Optional[str] = None
        expires: Optional[int] = None
        explicit_id: Optional[str] = None
        while True:
            tok = self.peek()
            if tok is None or tok.kind != "WORD" or tok.text in _EFFECT_WORDS:
                break
            if tok.text in _CONSTRAINT_WORDS:
                constraints.append(self.parse_constraint())
            elif tok.text == "scope":
                self.next()
                scope = self.next("STR", "scope string").text
            elif tok.text == "expires":
                self.next()
                t = self.next("INT", "turn count")
                expires = int(t.text)
                if expires <= 0:
                    raise PolicySyntaxError("expires must be positive", t.line, t.col)
            elif tok.text == "clearance":
                self.next()
                clearance = self.parse_label_set()
            elif tok.text == "id":
                self.next()
                explicit_id = self.next("STR", "rule id string").text
            else:
                raise PolicySyntaxError(f"unexpected keyword {tok.text!r}", tok.line, tok.col)
        return explicit_id, effect, Matcher(glob_tok.text, tuple(constraints)), clearance, scope, expires

    def parse_constraint(self) -> Constraint:
        tok = self.next("WORD")
        if tok.text == "path_prefix":
            return PathPrefix(self.next("STR", "path string").text)
        if tok.text == "domain_in":
            self.next("LBRACE", "'{'")
            domains = [self.next("STR", "domain string")]
            while self.peek() and self.peek().kind == "COMMA":
                self.next()
                domains.append(self.next("STR", "domain string"))
            self.next("RBRACE", "'}'")
            for d in domains:
                if d.text != d.text.lower() or "://" in d.text or "/" in d.text:
                    raise PolicySyntaxError(f"domain must be lowercase host only: {d.text!r}", d.line, d.col)
            return DomainIn(frozenset(d.text for d in domains))
        if tok.text == "port_range":
            lo_tok = self.next("INT", "port")
            self.next("RANGE", "'..'")
            hi_tok = self.next("INT", "port")
            lo, hi = int(lo_tok.text), int(hi_tok.text)
            try:
                return PortRange(lo, hi)
            except ValueError as e:
                raise PolicySyntaxError(str(e), lo_tok.line, lo_tok.col) from None
        if tok.text == "issue_id":
            return IssueId(int(self.next("INT", "issue number").text))
        if tok.text == "value_equals":
            name = self.next("WORD", "argument name").text
            return ValueEquals(name, self.next("STR", "value string").text)
        raise PolicySyntaxError(f"unknown constraint {tok.text!r}", tok.line, tok.col)

    def parse_label_set(self) -> LabelSet:
        self.next("LBRACE", "'{'")
        labels: list[Label] = []
        while True:
            tok = self.peek()
            if tok is None:
                raise PolicySyntaxError("unterminated clearance set", 0, 0)
            if tok.kind == "RBRACE":
                self.next()
                break
            if tok.kind == "COMMA":
                self.next()
                continue
            kind_tok = self.next("WORD", "label kind")
            if kind_tok.text not in _LABEL_KINDS:
                raise PolicySyntaxError(f"unknown label kind {kind_tok.text!r}", kind_tok.line, kind_tok.col)
            source = self.next("STR", "label source").text
            sens_tok = self.next("WORD", "sensitivity")
            if sens_tok.text not in _SENSITIVITIES:
                raise PolicySyntaxError(f"unknown sensitivity {sens_tok.text!r}", sens_tok.line, sens_tok.col)
            labels.append(Label(_LABEL_KINDS[kind_tok.text], source, _SENSITIVITIES[sens_tok.text]))
        return LabelSet(labels)


def parse_policy(text: str) -> Policy:
    """Parse DSL source into a Policy; rules keep source order."""
    meta = PolicyMeta()
    for raw_line in text.splitlines():
        m = _META_RE.match(raw_line.strip())
        if m:
            meta = PolicyMeta(name=m.group(1), version=m.group(2))
            break
    return _Parser(_lex(text)).parse_policy(meta)


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def serialize_policy(p: Policy) -> str:
    """Render a Policy back to DSL source; parse(serialize(p)) == p."""
    lines: list[str] = []
    if p.metadata != PolicyMeta():
        lines.append(f"# policy: {p.metadata.name} {p.metadata.version}")
    for idx, rule in enumerate(p.rules):
        parts = [rule.effect.value, rule.matcher.tool_glob]
        for c in rule.matcher.constraints:
            if isinstance(c, PathPrefix):
                parts.append(f"path_prefix {_quote(c.prefix)}")
            elif isinstance(c, DomainIn):
                inner = ", ".join(_quote(d) for d in sorted(c.domains))
                parts.append("domain_in { " + inner + " }")
            elif isinstance(c, PortRange):
                parts.append(f"port_range {c.lo}..{c.hi}")
            elif isinstance(c, IssueId):
                parts.append(f"issue_id {c.value}")
            elif isinstance(c, ValueEquals):
                parts.append(f"value_equals {c.name} {_quote(c.value)}")
        if rule.scope is not None:
            parts.append(f"scope {_quote(rule.scope)}")
        if rule.expiry_turns is not None:
            parts.append(f"expires {rule.expiry_turns}")
        if rule.sink_clearance is not None:
            inner = ", ".join(
                f"{l.kind.value} {_quote(l.source_id)} {l.sensitivity.value}"
                for l in rule.sink_clearance.sorted_labels()
            )
            parts.append("clearance { " + inner + " }")
        if rule.rule_id != f"rule-{idx + 1}":
            parts.append(f"id {_quote(rule.rule_id)}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


# Built-in task templates, keyed by template_id.
BUILTIN_TEMPLATES: dict[str, TaskTemplate] = {
    "gitlab-comment": TaskTemplate(
        template_id="gitlab-comment",
        params=("host", "issue"),
        rule_skeletons=(
            {
                "effect": "allow",
                "tool": "net.http_get",
                "constraints": [{"domain_in": ["{host}"]}, {"issue_id": "{issue}"}],
            },
            {
                "effect": "allow",
                "tool": "gitlab.comment",
                "constraints": [{"issue_id": "{issue}"}],
            },
        ),
    ),
    "dev-preview": TaskTemplate(
        template_id="dev-preview",
        params=("port_lo", "port_hi"),
        rule_skeletons=(
            {
                "effect": "allow",
                "tool": "expose_port",
                "constraints": [{"port_range": ["{port_lo}", "{port_hi}"]}],
            },
        ),
    ),
}


def empty_clearance_set(labels: Iterable[Label] = ()) -> LabelSet:
    return LabelSet(labels)
