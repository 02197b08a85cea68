"""Shared domain types: trust levels, labels, segments, tool calls, decisions, audit records.

Pure value types with no I/O and no enforcement logic. Everything here is
immutable and hashable so values can be copied freely between sessions and
serialized losslessly into audit logs.
"""

from __future__ import annotations

import base64
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterator, Optional


class TrustLevel(Enum):
    """Ordered provenance class of context content: SYSTEM > USER > EXTERNAL."""

    SYSTEM = 2
    USER = 1
    EXTERNAL = 0

    def __lt__(self, other: "TrustLevel") -> bool:
        return self.value < other.value

    def __le__(self, other: "TrustLevel") -> bool:
        return self.value <= other.value

    def __gt__(self, other: "TrustLevel") -> bool:
        return self.value > other.value

    def __ge__(self, other: "TrustLevel") -> bool:
        return self.value >= other.value

    @property
    def wire_name(self) -> str:
        return _TRUST_WIRE[self]

    @classmethod
    def from_wire(cls, name: str) -> "TrustLevel":
        try:
            return _TRUST_FROM_WIRE[name]
        except KeyError:
            raise ValueError(f"unknown trust level: {name!r}") from None


_TRUST_WIRE = {TrustLevel.SYSTEM: "System", TrustLevel.USER: "User", TrustLevel.EXTERNAL: "External"}
_TRUST_FROM_WIRE = {v: k for k, v in _TRUST_WIRE.items()}


def trust_compare(a: TrustLevel, b: TrustLevel) -> int:
    """Total-order comparison: negative if a < b, zero if equal, positive if a > b."""
    return (a.value > b.value) - (a.value < b.value)


class LabelKind(Enum):
    SECRET_MATERIAL = "SecretMaterial"
    USER_PII = "UserPII"
    UNTRUSTED_ORIGIN = "UntrustedOrigin"
    TOOL_OUTPUT = "ToolOutput"


class Sensitivity(Enum):
    PUBLIC = "Public"
    INTERNAL = "Internal"
    SECRET = "Secret"


@dataclass(frozen=True)
class Label:
    """Provenance-and-sensitivity tag. Equality is structural over all three fields."""

    kind: LabelKind
    source_id: str
    sensitivity: Sensitivity

    def __post_init__(self) -> None:
        if not self.source_id:
            raise ValueError("Label.source_id must be non-empty")

    def sort_key(self) -> tuple[str, str, str]:
        return (self.kind.value, self.source_id, self.sensitivity.value)

    def to_dict(self) -> dict[str, str]:
        return {
            "kind": self.kind.value,
            "source_id": self.source_id,
            "sensitivity": self.sensitivity.value,
        }

    @classmethod
    def from_dict(cls, d: dict[str, str]) -> "Label":
        return cls(LabelKind(d["kind"]), d["source_id"], Sensitivity(d["sensitivity"]))


class LabelSet(frozenset):
    """Duplicate-free set of Label values forming a powerset lattice under union."""

    __slots__ = ()

    def join(self, other: "LabelSet") -> "LabelSet":
        return LabelSet(frozenset.__or__(self, other))

    def __or__(self, other) -> "LabelSet":
        return LabelSet(frozenset.__or__(self, other))

    def __and__(self, other) -> "LabelSet":
        return LabelSet(frozenset.__and__(self, other))

    def __sub__(self, other) -> "LabelSet":
        return LabelSet(frozenset.__sub__(self, other))

    def sorted_labels(self) -> list[Label]:
        return sorted(self, key=Label.sort_key)

    def to_list(self) -> list[dict[str, str]]:
        return [l.to_dict() for l in self.sorted_labels()]

    @classmethod
    def from_list(cls, items: list[dict[str, str]]) -> "LabelSet":
        return cls(Label.from_dict(d) for d in items)


EMPTY_LABELS = LabelSet()


@dataclass(frozen=True)
class Segment:
    """One unit of context content with its trust layer and labels.

    A segment with EXTERNAL trust must carry at least one UntrustedOrigin
    label; the gateway attaches one keyed by the content source.
    """

    segment_id: int | str
    trust: TrustLevel
    content: bytes
    labels: LabelSet = EMPTY_LABELS

    def __post_init__(self) -> None:
        if self.trust is TrustLevel.EXTERNAL:
            if not any(l.kind is LabelKind.UNTRUSTED_ORIGIN for l in self.labels):
                raise ValueError("EXTERNAL segment must carry an UntrustedOrigin label")

    def to_dict(self) -> dict[str, Any]:
        return {
            "segment_id": self.segment_id,
            "trust": self.trust.wire_name,
            "content": base64.b64encode(self.content).decode("ascii"),
            "labels": self.labels.to_list(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Segment":
        return cls(
            segment_id=d["segment_id"],
            trust=TrustLevel.from_wire(d["trust"]),
            content=base64.b64decode(d["content"]),
            labels=LabelSet.from_list(d.get("labels", [])),
        )


@dataclass(frozen=True)
class Arg:
    """A leaf value in a tool-call argument tree, tagged with its labels."""

    value: Any
    labels: LabelSet = EMPTY_LABELS

    def to_dict(self) -> dict[str, Any]:
        value = self.value
        if isinstance(value, bytes):
            value = {"b64": base64.b64encode(value).decode("ascii")}
        return {"value": value, "labels": self.labels.to_list()}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Arg":
        value = d["value"]
        if isinstance(value, dict) and set(value) == {"b64"}:
            value = base64.b64decode(value["b64"])
        return cls(value=value, labels=LabelSet.from_list(d.get("labels", [])))


_TOOL_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)*$")

ArgTree = dict  # str -> Arg | list | dict, leaves are Arg


def iter_arg_leaves(args: ArgTree) -> Iterator[tuple[str, Arg]]:
    """Yield (dotted path, leaf) for every Arg in the tree."""

    def walk(node: Any, path: str) -> Iterator[tuple[str, Arg]]:
        if isinstance(node, Arg):
            yield path, node
        elif isinstance(node, dict):
            for k, v in node.items():
                yield from walk(v, f"{path}.{k}" if path else str(k))
        elif isinstance(node, (list, tuple)):
            for i, v in enumerate(node):
                yield from walk(v, f"{path}[{i}]")
        else:
            raise TypeError(f"arg leaf at {path!r} is not an Arg: {node!r}")

    yield from walk(args, "")


def _args_to_jsonable(node: Any) -> Any:
    if isinstance(node, Arg):
        return node.to_dict()
    if isinstance(node, dict):
        return {k: _args_to_jsonable(v) for k, v in node.items()}
    if isinstance(node, (list, tuple)):
        return [_args_to_jsonable(v) for v in node]
    raise TypeError(f"not an arg tree node: {node!r}")


def _args_from_jsonable(node: Any) -> Any:
    if isinstance(node, dict):
        if set(node) == {"value", "labels"}:
            return Arg.from_dict(node)
        return {k: _args_from_jsonable(v) for k, v in node.items()}
    if isinstance(node, list):
        return [_args_from_jsonable(v) for v in node]
    raise TypeError(f"not a serialized arg tree node: {node!r}")


@dataclass(frozen=True)
class ToolCall:
    """A mediated request: one tool invocation with labeled arguments."""

    call_id: str
    tool: str
    args: ArgTree
    origin_trust: TrustLevel
    task_id: str

    def __post_init__(self) -> None:
        if not _TOOL_NAME_RE.match(self.tool):
            raise ValueError(f"tool name does not match ident('.'ident)*: {self.tool!r}")
        for _path, leaf in iter_arg_leaves(self.args):
            if not isinstance(leaf.labels, LabelSet):
                raise TypeError("every arg leaf must carry a LabelSet")

    def arg_label_sets(self) -> list[LabelSet]:
        return [leaf.labels for _p, leaf in iter_arg_leaves(self.args)]

    def leaf(self, name: str) -> Optional[Arg]:
        """Top-level argument by name, or None."""
        node = self.args.get(name)
        return node if isinstance(node, Arg) else None

    def to_dict(self) -> dict[str, Any]:
        return {
            "call_id": self.call_id,
            "tool": self.tool,
            "args": _args_to_jsonable(self.args),
            "origin_trust": self.origin_trust.wire_name,
            "task_id": self.task_id,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ToolCall":
        return cls(
            call_id=d["call_id"],
            tool=d["tool"],
            args=_args_from_jsonable(d["args"]),
            origin_trust=TrustLevel.from_wire(d["origin_trust"]),
            task_id=d["task_id"],
        )


class Verdict(Enum):
    ALLOW = "Allow"
    DENY = "Deny"
    PENDING = "Pending"


@dataclass(frozen=True)
class Decision:
    """Verdict for one mediated call. Deny and Pending always carry a reason code."""

    verdict: Verdict
    reason_code: Optional[str] = None
    matched_rule: Optional[str] = None
    approval_id: Optional[str] = None

    def __post_init__(self) -> None:
        if self.verdict in (Verdict.DENY, Verdict.PENDING) and not self.reason_code:
            raise ValueError(f"{self.verdict.value} decision requires a reason_code")
        if (self.approval_id is not None) != (self.verdict is Verdict.PENDING):
            raise ValueError("approval_id present iff verdict is Pending")

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict.value,
            "reason_code": self.reason_code,
            "matched_rule": self.matched_rule,
            "approval_id": self.approval_id,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Decision":
        return cls(
            verdict=Verdict(d["verdict"]),
            reason_code=d.get("reason_code"),
            matched_rule=d.get("matched_rule"),
            approval_id=d.get("approval_id"),
        )


@dataclass(frozen=True)
class AuditRecord:
    """One log entry; seq is per-session, gap-free, starting at 1."""

    seq: int
    call: ToolCall
    decision: Decision
    label_snapshot: LabelSet
    timestamp: int  # logical clock; digest computation zeroes it

    def to_dict(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "call": self.call.to_dict(),
            "decision": self.decision.to_dict(),
            "label_snapshot": self.label_snapshot.to_list(),
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "AuditRecord":
        return cls(
            seq=d["seq"],
            call=ToolCall.from_dict(d["call"]),
            decision=Decision.from_dict(d["decision"]),
            label_snapshot=LabelSet.from_list(d.get("label_snapshot", [])),
            timestamp=d["timestamp"],
        )
