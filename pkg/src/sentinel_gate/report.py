"""Render scenario results to delimited files and summary figures.

The bundle written by ``write_report_bundle`` contains:

* ``scenario_results.csv``   one row per (scenario, mode) run
* ``reports.jsonl``          the full report dicts, one per line
* ``defense_matrix.png``     which pipeline stage stopped each attack
* ``outcomes.png``           blocked/leaked counts, Monitored vs Permissive
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .gateway import Mode
from .scenario import Report, Scenario, load_builtin_scenarios, run_scenario

STAGES = ("tamper", "policy", "flow", "scanner", "approval")


def stage_of(reason_code: str | None) -> str | None:
    """Map a deny reason to the pipeline stage that produced it."""
    if reason_code is None:
        return None
    if reason_code == "tcb-tamper":
        return "tamper"
    if reason_code in ("default-deny", "port-out-of-range", "policy-deny", "privilege-escalation"):
        return "policy"
    if reason_code == "flow-violation":
        return "flow"
    if reason_code.startswith("scanner:"):
        return "scanner"
    if reason_code in ("approval-denied", "approval:memory-write"):
        return "approval"
    return None


def run_matrix(scenarios: list[Scenario] | None = None) -> list[Report]:
    """Run every scenario in Monitored mode, and attacks in Permissive too."""
    if scenarios is None:
        scenarios = load_builtin_scenarios()
    reports: list[Report] = []
    for sc in scenarios:
        reports.append(run_scenario(sc, Mode.MONITORED))
        if sc.kind == "attack":
            reports.append(run_scenario(sc, Mode.PERMISSIVE))
    return reports


CSV_COLUMNS = (
    "scenario_id",
    "kind",
    "mode",
    "steps_run",
    "denials",
    "blocked_step",
    "blocked_reason",
    "expected_block_step",
    "expected_block_reason",
    "block_matches",
    "exfil_observed",
    "expect_failures",
    "audit_digest",
)


def write_csv(reports: list[Report], path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in reports:
            block_matches = r.block_matches_expectation if r.mode == Mode.MONITORED.value else ""
            writer.writerow(
                [
                    r.scenario_id,
                    r.kind,
                    r.mode,
                    r.steps_run,
                    r.denials,
                    r.blocked_step if r.blocked_step is not None else "",
                    r.blocked_reason or "",
                    r.expected_block_step if r.expected_block_step is not None else "",
                    r.expected_block_reason or "",
                    block_matches,
                    r.exfil_observed,
                    r.expect_failures,
                    r.audit_digest,
                ]
            )


def write_jsonl(reports: list[Report], path: Path) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for r in reports:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def plot_defense_matrix(reports: list[Report], path: Path) -> None:
    """One row per attack scenario, one column per pipeline stage; the filled
    cell is the stage that produced the first denial in Monitored mode."""
    monitored = [r for r in reports if r.mode == Mode.MONITORED.value and r.kind == "attack"]
    monitored.sort(key=lambda r: r.scenario_id)
    grid = [[0] * len(STAGES) for _ in monitored]
    for i, r in enumerate(monitored):
        stage = stage_of(r.blocked_reason)
        if stage is not None:
            grid[i][STAGES.index(stage)] = 1

    fig, ax = plt.subplots(figsize=(7.2, 0.5 * len(monitored) + 1.6))
    ax.imshow(grid, cmap="Greens", vmin=0, vmax=1.4, aspect="auto")
    ax.set_xticks(range(len(STAGES)), labels=[s.title() for s in STAGES])
    ax.set_yticks(range(len(monitored)), labels=[r.scenario_id for r in monitored], fontsize=8)
    for i, r in enumerate(monitored):
        stage = stage_of(r.blocked_reason)
        if stage is not None:
            ax.text(
                STAGES.index(stage),
                i,
                r.blocked_reason,
                ha="center",
                va="center",
                fontsize=7,
            )
    ax.set_title("First blocking stage per attack scenario (Monitored)")
    ax.set_xlabel("Pipeline stage")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_outcomes(reports: list[Report], path: Path) -> None:
    attacks_mon = [r for r in reports if r.kind == "attack" and r.mode == Mode.MONITORED.value]
    attacks_perm = [r for r in reports if r.kind == "attack" and r.mode == Mode.PERMISSIVE.value]
    benign_mon = [r for r in reports if r.kind == "benign" and r.mode == Mode.MONITORED.value]

    groups = [
        ("Attacks\nblocked", sum(1 for r in attacks_mon if r.blocked_step is not None), len(attacks_mon)),
        ("Attacks leaking\n(Monitored)", sum(1 for r in attacks_mon if r.exfil_observed), len(attacks_mon)),
        ("Attacks leaking\n(Permissive)", sum(1 for r in attacks_perm if r.exfil_observed), len(attacks_perm)),
        ("Benign denied", sum(1 for r in benign_mon if r.denials), len(benign_mon)),
    ]
    fig, ax = plt.subplots(figsize=(6.8, 4.0))
    xs = range(len(groups))
    counts = [g[1] for g in groups]
    totals = [g[2] for g in groups]
    bars = ax.bar(xs, counts, color=["#2d7f3f", "#b03a2e", "#b03a2e", "#b03a2e"])
    ax.bar(xs, [t - c for c, t in zip(counts, totals)], bottom=counts, color="#dddddd")
    ax.set_xticks(list(xs), labels=[g[0] for g in groups], fontsize=9)
    ax.set_ylabel("scenarios")
    ax.set_title("Scenario outcomes by mode")
    for bar, c, t in zip(bars, counts, totals):
        ax.text(bar.get_x() + bar.get_width() / 2, t + 0.15, f"{c}/{t}", ha="center", fontsize=9)
    ax.set_ylim(0, max(totals) + 1.2)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_report_bundle(reports: list[Report], out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": out / "scenario_results.csv",
        "jsonl": out / "reports.jsonl",
        "defense_matrix": out / "defense_matrix.png",
        "outcomes": out / "outcomes.png",
    }
    write_csv(reports, paths["csv"])
    write_jsonl(reports, paths["jsonl"])
    plot_defense_matrix(reports, paths["defense_matrix"])
    plot_outcomes(reports, paths["outcomes"])
    return paths
