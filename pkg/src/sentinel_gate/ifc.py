"""Taint propagation and flow checking over the label lattice.

Labels form a powerset lattice: join is set union, bottom is the empty set.
Model outputs are labeled with the union of every label in the visible
context, a sound over-approximation that never under-labels.  Flows into a
sink are allowed only when every carried label is covered by the sink's
clearance.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable
from urllib.parse import quote

from .model import (
    EMPTY_LABELS,
    Label,
    LabelKind,
    LabelSet,
    Segment,
    Sensitivity,
    ToolCall,
)

MIN_SECRET_BYTES = 4


class SinkKind(Enum):
    TERMINAL = "Terminal"
    NETWORK_DOMAIN = "NetworkDomain"
    FILE = "File"
    CLIPBOARD = "Clipboard"
    MEMORY = "Memory"
    BROWSER = "Browser"
    UI = "Ui"


@dataclass(frozen=True)
class SinkDescriptor:
    """An exit point for data, with the labels it is cleared to receive.

    A clearance entry covers a label when the kinds match, the sensitivities
    match, and the entry's source_id equals the label's or is "*".
    """

    sink_id: str
    kind: SinkKind
    clearance: LabelSet = EMPTY_LABELS

    def covers(self, label: Label) -> bool:
        for entry in self.clearance:
            if (
                entry.kind is label.kind
                and entry.sensitivity is label.sensitivity
                and entry.source_id in ("*", label.source_id)
            ):
                return True
        return False


@dataclass(frozen=True)
class FlowVerdict:
    allowed: bool
    violating: LabelSet = EMPTY_LABELS

    def __post_init__(self) -> None:
        if self.allowed and self.violating:
            raise ValueError("an allowed flow cannot carry violating labels")


def join(a: LabelSet, b: LabelSet) -> LabelSet:
    """Lattice join: set union."""
    return a | b


def join_all(sets: Iterable[LabelSet]) -> LabelSet:
    out = EMPTY_LABELS
    for s in sets:
        out = out | s
    return out


def propagate_call(call: ToolCall) -> LabelSet:
    """Labels flowing into a tool call: the union over every argument leaf."""
    return join_all(call.arg_label_sets())


def model_output_labels(context: Iterable[Segment]) -> LabelSet:
    """Labels on anything the model emits: the union over the whole context.

    No attempt is made to track which segment influenced which output token;
    the over-approximation is what makes the check sound.
    """
    return join_all(seg.labels for seg in context)


def check_flow(labels: LabelSet, sink: SinkDescriptor) -> FlowVerdict:
    violating = LabelSet(l for l in labels if not sink.covers(l))
    return FlowVerdict(allowed=not violating, violating=violating)


def declassify(labels: LabelSet, label: Label, approval_id: str) -> LabelSet:
    """Remove one label under an operator approval; refuses without one."""
    if not approval_id:
        raise PermissionError("declassification requires an approval id")
    if label not in labels:
        raise KeyError(f"label not present: {label!r}")
    return labels - LabelSet([label])


def propagate_graph(
    initial: dict[str, LabelSet],
    edges: Iterable[tuple[str, str]],
) -> dict[str, LabelSet]:
    """Propagate labels along a dependency DAG.

    An edge (u, v) means v consumed u's output, so v's final label set is
    the join of its own initial labels with every ancestor's.  Runs a fixed
    point over the edge list; cycles converge too, though mediated call
    graphs never contain them.
    """
    labels = dict(initial)
    edge_list = list(edges)
    for u, v in edge_list:
        labels.setdefault(u, EMPTY_LABELS)
        labels.setdefault(v, EMPTY_LABELS)
    changed = True
    while changed:
        changed = False
        for u, v in edge_list:
            merged = labels[v] | labels[u]
            if merged != labels[v]:
                labels[v] = merged
                changed = True
    return labels


# ---------------------------------------------------------------------------
# Secret registry
# ---------------------------------------------------------------------------

def _encodings(raw: bytes) -> dict[str, str]:
    text = raw.decode("utf-8", errors="surrogateescape")
    return {
        "raw": text,
        "base64": base64.b64encode(raw).decode("ascii"),
        "hex": raw.hex(),
        "percent": quote(text, safe=""),
    }


@dataclass
class _SecretEntry:
    source_id: str
    raw: bytes
    variants: dict[str, str]  # encoding name -> encoded text


@dataclass
class SecretRegistry:
    """Known secret values and their common wire encodings.

    Scanners consult the registry to catch secrets smuggled through URLs or
    hostnames after base64, hex, or percent encoding.  Values shorter than
    MIN_SECRET_BYTES are rejected: they would match everywhere.
    """

    _entries: dict[str, _SecretEntry] = field(default_factory=dict)

    def register_secret(self, value: bytes | str, source_id: str) -> Label:
        raw = value.encode("utf-8") if isinstance(value, str) else bytes(value)
        if len(raw) < MIN_SECRET_BYTES:
            raise ValueError(f"secret must be at least {MIN_SECRET_BYTES} bytes")
        if not source_id:
            raise ValueError("source_id must be non-empty")
        self._entries[source_id] = _SecretEntry(source_id, raw, _encodings(raw))
        return Label(LabelKind.SECRET_MATERIAL, source_id, Sensitivity.SECRET)

    def source_ids(self) -> list[str]:
        return sorted(self._entries)

    def raw_value(self, source_id: str) -> bytes:
        return self._entries[source_id].raw

    def variants(self, source_id: str) -> dict[str, str]:
        return dict(self._entries[source_id].variants)

    def find_in_text(self, text: str) -> list[tuple[str, str]]:
        """Return (source_id, encoding) pairs whose encoded form occurs in text.

        Matching is case-sensitive for raw/base64/percent and case-insensitive
        for hex, since hostnames are case-folded on the wire.
        """
        hits: list[tuple[str, str]] = []
        lowered = text.lower()
        for entry in self._entries.values():
            for encoding, encoded in entry.variants.items():
                if encoding == "hex":
                    if encoded in lowered:
                        hits.append((entry.source_id, encoding))
                elif encoded in text:
                    hits.append((entry.source_id, encoding))
        return hits

    def label_for(self, source_id: str) -> Label:
        if source_id not in self._entries:
            raise KeyError(source_id)
        return Label(LabelKind.SECRET_MATERIAL, source_id, Sensitivity.SECRET)
