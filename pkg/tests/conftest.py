"""Shared helpers for the test suite."""

from __future__ import annotations

import itertools

import pytest

from sentinel_gate.model import Arg, EMPTY_LABELS, LabelSet, ToolCall, TrustLevel

_counter = itertools.count(1)


def mk_call(
    tool: str,
    args: dict | None = None,
    *,
    trust: TrustLevel = TrustLevel.USER,
    task_id: str = "task-test",
    call_id: str | None = None,
) -> ToolCall:
    """Build a ToolCall, wrapping plain values into unlabeled Args."""
    wrapped = {}
    for name, value in (args or {}).items():
        wrapped[name] = value if isinstance(value, Arg) else Arg(value, EMPTY_LABELS)
    return ToolCall(
        call_id=call_id or f"call-{next(_counter)}",
        tool=tool,
        args=wrapped,
        origin_trust=trust,
        task_id=task_id,
    )


def labeled(value, *labels) -> Arg:
    return Arg(value, LabelSet(labels))


@pytest.fixture
def call():
    return mk_call
