"""Command-line entry points.

    sentinel-gate run       replay scenario fixtures, print outcomes, and
                            optionally write the CSV/figure report bundle
    sentinel-gate validate  parse a policy file and round-trip it
    sentinel-gate scan      run the content scanners over a file or stdin
    sentinel-gate serve     expose a session over the operator HTTP API

Exit codes: 0 success, 1 the command ran but found problems (failed
expectations, denying findings, invalid policy), 2 usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from .config import ConfigError, OperatorConfig, load_operator_config
from .gateway import Mode
from .policy import PolicySyntaxError, DuplicateRuleIdError, parse_policy, serialize_policy
from .report import run_matrix, write_report_bundle
from .scanners import (
    FindingKind,
    scan_command,
    scan_markdown_images,
    scan_unicode_smuggling,
    scan_url,
    strip_ansi,
)
from .scenario import (
    ReplayDriver,
    ScenarioFormatError,
    Scenario,
    build_session,
    fixture_paths,
    load_scenario,
    run_scenario,
)
from .server import make_server

_DENYING_KINDS = {
    FindingKind.UNICODE_SMUGGLING,
    FindingKind.ANSI_OSC52,
    FindingKind.TAINTED_URL_PARAM,
    FindingKind.ENCODED_SECRET,
    FindingKind.DNS_EXFIL,
    FindingKind.UNAPPROVED_DOMAIN,
}


def _load_selected(args: argparse.Namespace) -> list[Scenario]:
    if args.fixture:
        return [load_scenario(Path(p)) for p in args.fixture]
    scenarios = [load_scenario(p) for p in fixture_paths()]
    if args.scenario:
        wanted = set(args.scenario)
        scenarios = [s for s in scenarios if s.scenario_id in wanted]
        missing = wanted - {s.scenario_id for s in scenarios}
        if missing:
            raise ScenarioFormatError(f"unknown scenario ids: {sorted(missing)}")
    return scenarios


def _load_config(args: argparse.Namespace) -> Optional[OperatorConfig]:
    if not getattr(args, "config", None):
        return None
    return load_operator_config(args.config)


def cmd_run(args: argparse.Namespace) -> int:
    try:
        scenarios = _load_selected(args)
        config = _load_config(args)
    except (ScenarioFormatError, ConfigError, json.JSONDecodeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    if not scenarios:
        print("error: no scenarios selected", file=sys.stderr)
        return 2

    modes = {"monitored": [Mode.MONITORED], "permissive": [Mode.PERMISSIVE],
             "both": [Mode.MONITORED, Mode.PERMISSIVE]}[args.mode]
    failures = 0
    reports = []
    for sc in scenarios:
        for mode in modes:
            rep = run_scenario(sc, mode, config)
            reports.append(rep)
            ok = True
            if mode is Mode.MONITORED:
                if sc.kind == "attack":
                    ok = rep.block_matches_expectation and not rep.exfil_observed
                else:
                    ok = rep.denials == 0
                ok = ok and rep.expect_failures == 0
            else:
                if sc.kind == "attack":
                    ok = rep.exfil_observed
            status = "ok" if ok else "FAIL"
            failures += 0 if ok else 1
            blocked = (
                f"blocked@{rep.blocked_step}:{rep.blocked_reason}"
                if rep.blocked_step is not None
                else "no-block"
            )
            print(
                f"[{status}] {sc.scenario_id} ({sc.kind}, {mode.value}): "
                f"{blocked} denials={rep.denials} exfil={str(rep.exfil_observed).lower()}"
            )
    if args.out:
        if args.mode != "both" or args.scenario or args.fixture:
            # The bundle is meant to summarize the full matrix; partial runs
            # still get a bundle of whatever was run.
            paths = write_report_bundle(reports, args.out)
        else:
            paths = write_report_bundle(run_matrix(scenarios), args.out)
        for name, p in sorted(paths.items()):
            print(f"wrote {name}: {p}")
    return 1 if failures else 0


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        text = Path(args.policy).read_text(encoding="utf-8")
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    try:
        policy = parse_policy(text)
    except PolicySyntaxError as e:
        print(f"invalid: {e}", file=sys.stderr)
        return 1
    except DuplicateRuleIdError as e:
        print(f"invalid: {e}", file=sys.stderr)
        return 1
    round_tripped = parse_policy(serialize_policy(policy))
    if round_tripped != policy:
        print("invalid: serialization does not round-trip", file=sys.stderr)
        return 1
    print(f"ok: {len(policy.rules)} rules ({policy.metadata.name} v{policy.metadata.version})")
    return 0


def cmd_scan(args: argparse.Namespace) -> int:
    if args.file:
        try:
            text = Path(args.file).read_text(encoding="utf-8")
        except OSError as e:
            print(f"error: {e}", file=sys.stderr)
            return 2
    else:
        text = sys.stdin.read()
    findings = []
    clean = text
    if args.kind == "text":
        findings.extend(scan_unicode_smuggling(text))
        clean, ansi = strip_ansi(text, allow_sgr=args.allow_sgr)
        findings.extend(ansi)
    elif args.kind == "url":
        findings.extend(scan_url(text.strip()))
    elif args.kind == "command":
        import shlex

        findings.extend(scan_command(shlex.split(text.strip())))
    elif args.kind == "markdown":
        findings.extend(scan_markdown_images(text, untrusted_origin=True))
        findings.extend(scan_unicode_smuggling(text))
        clean, ansi = strip_ansi(text, allow_sgr=args.allow_sgr)
        findings.extend(ansi)
    for f in findings:
        print(json.dumps(f.to_dict()))
    if args.print_clean:
        sys.stdout.write(clean)
    denying = any(f.kind in _DENYING_KINDS for f in findings)
    return 1 if denying else 0


def cmd_serve(args: argparse.Namespace) -> int:
    try:
        config = _load_config(args)
        if args.fixture:
            scenario = load_scenario(Path(args.fixture))
        else:
            matches = [p for p in fixture_paths() if p.stem == args.scenario] if args.scenario else []
            if args.scenario and not matches:
                print(f"error: unknown scenario {args.scenario!r}", file=sys.stderr)
                return 2
            scenario = load_scenario(matches[0]) if matches else None
    except (ScenarioFormatError, ConfigError, json.JSONDecodeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    if scenario is None:
        # An empty default-deny session: useful to poke at the API shape.
        scenario = load_scenario(
            {
                "scenario_id": "interactive",
                "title": "empty interactive session",
                "kind": "benign",
                "seed": {"policy": ""},
                "steps": [{"expect": {"memory_empty": True}}],
            }
        )
    session, gw, task_id = build_session(scenario, Mode.MONITORED, config)
    driver = ReplayDriver(scenario, session, gw, task_id or scenario.scenario_id)
    # The event log attaches before replay so /v1/events can serve history;
    # the driver pauses at each escalation until the operator resolves it.
    server = make_server(
        session, gw, host=args.host, port=args.port, token=args.token,
        on_resolve=driver.resume,
    )
    driver.run_until_blocked()
    host, port = server.server_address[:2]
    pending = sum(1 for e in session.pending.values() if e.status == "pending")
    print(f"serving {scenario.scenario_id} on http://{host}:{port} "
          f"({len(session.audit)} audit records, {pending} pending, "
          f"{'replay paused' if not driver.finished else 'replay done'})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sentinel-gate",
        description="Deterministic reference monitor for scripted agent tool calls.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="replay scenario fixtures")
    p_run.add_argument("--scenario", action="append", help="scenario id (repeatable)")
    p_run.add_argument("--fixture", action="append", help="path to a fixture JSON (repeatable)")
    p_run.add_argument("--mode", choices=("monitored", "permissive", "both"), default="monitored")
    p_run.add_argument("--out", help="directory for the CSV/JSONL/figure bundle")
    p_run.add_argument("--config", help="operator config JSON file")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="parse and round-trip a policy file")
    p_val.add_argument("policy", help="path to a policy DSL file")
    p_val.set_defaults(func=cmd_validate)

    p_scan = sub.add_parser("scan", help="run content scanners over a file or stdin")
    p_scan.add_argument("--file", help="input file (default: stdin)")
    p_scan.add_argument("--kind", choices=("text", "url", "command", "markdown"), default="text")
    p_scan.add_argument("--allow-sgr", action="store_true", help="keep SGR color sequences when sanitizing")
    p_scan.add_argument("--print-clean", action="store_true", help="write sanitized text to stdout after findings")
    p_scan.set_defaults(func=cmd_scan)

    p_serve = sub.add_parser("serve", help="expose a session over the operator HTTP API")
    p_serve.add_argument("--scenario", help="builtin scenario id to load")
    p_serve.add_argument("--fixture", help="path to a fixture JSON to load")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8787)
    p_serve.add_argument("--token", help="require X-Operator-Token on every request")
    p_serve.add_argument("--config", help="operator config JSON file")
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
