"""Deterministic reference monitor for scripted agent tool calls.

Every tool call an agent script makes is routed through a single gateway
that applies, in order: a tamper guard over the monitor's own state, a
capability policy, an information-flow check, content scanners, and a
human-approval escalation path. Each mediated call produces exactly one
audit record; the whole pipeline is deterministic, so a session replayed
from the same inputs yields a byte-identical audit digest.
"""

from __future__ import annotations

from .config import ConfigError, OperatorConfig, load_operator_config
from .gateway import (
    ALL_REASON_CODES,
    AlreadyResolvedError,
    ExecutorFailure,
    Gateway,
    Mode,
    NoSuchApprovalError,
    NotAuthorizedError,
    PendingEscalation,
    ProtectedPathSet,
    SessionClosedError,
    SessionContext,
    ToolDescriptor,
    UnknownToolError,
    default_toolset,
)
from .ifc import (
    FlowVerdict,
    SecretRegistry,
    SinkDescriptor,
    SinkKind,
    check_flow,
    declassify,
    join,
    join_all,
    model_output_labels,
    propagate_call,
    propagate_graph,
)
from .model import (
    Arg,
    AuditRecord,
    Decision,
    Label,
    LabelKind,
    LabelSet,
    EMPTY_LABELS,
    Segment,
    Sensitivity,
    ToolCall,
    TrustLevel,
    Verdict,
    iter_arg_leaves,
    trust_compare,
)
from .policy import (
    DuplicateRuleIdError,
    Effect,
    MissingBindingError,
    Policy,
    PolicyRule,
    PolicySyntaxError,
    PrivilegeEscalationError,
    TaskTemplate,
    TypeMismatchError,
    derive_task_policy,
    evaluate,
    merge_policies,
    parse_policy,
    serialize_policy,
)
from .scanners import (
    Finding,
    FindingKind,
    scan_command,
    scan_markdown_images,
    scan_unicode_smuggling,
    scan_url,
    strip_ansi,
)
from .scenario import (
    ReplayDriver,
    Report,
    Scenario,
    ScenarioFormatError,
    build_session,
    fixture_paths,
    load_builtin_scenarios,
    load_scenario,
    run_scenario,
    run_steps,
)
from .server import make_server

__version__ = "0.1.0"

__all__ = [
    "ALL_REASON_CODES",
    "AlreadyResolvedError",
    "Arg",
    "AuditRecord",
    "ConfigError",
    "Decision",
    "DuplicateRuleIdError",
    "ExecutorFailure",
    "Effect",
    "EMPTY_LABELS",
    "Finding",
    "FindingKind",
    "FlowVerdict",
    "Gateway",
    "Label",
    "LabelKind",
    "LabelSet",
    "MissingBindingError",
    "Mode",
    "NoSuchApprovalError",
    "NotAuthorizedError",
    "OperatorConfig",
    "PendingEscalation",
    "Policy",
    "PolicyRule",
    "PolicySyntaxError",
    "PrivilegeEscalationError",
    "ProtectedPathSet",
    "ReplayDriver",
    "Report",
    "Scenario",
    "ScenarioFormatError",
    "SecretRegistry",
    "Segment",
    "Sensitivity",
    "SessionClosedError",
    "SessionContext",
    "SinkDescriptor",
    "SinkKind",
    "TaskTemplate",
    "ToolCall",
    "ToolDescriptor",
    "TrustLevel",
    "TypeMismatchError",
    "UnknownToolError",
    "Verdict",
    "build_session",
    "check_flow",
    "declassify",
    "default_toolset",
    "derive_task_policy",
    "evaluate",
    "fixture_paths",
    "iter_arg_leaves",
    "join",
    "join_all",
    "load_builtin_scenarios",
    "load_operator_config",
    "load_scenario",
    "make_server",
    "merge_policies",
    "model_output_labels",
    "parse_policy",
    "propagate_call",
    "propagate_graph",
    "run_scenario",
    "run_steps",
    "scan_command",
    "scan_markdown_images",
    "scan_unicode_smuggling",
    "scan_url",
    "serialize_policy",
    "strip_ansi",
    "trust_compare",
    "__version__",
]
