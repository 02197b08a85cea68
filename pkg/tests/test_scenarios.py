"""Fixture corpus: every attack blocks where expected, every twin completes."""

import pytest

from sentinel_gate.gateway import Mode
from sentinel_gate.scenario import (
    ReplayDriver,
    ScenarioFormatError,
    build_session,
    load_builtin_scenarios,
    load_scenario,
    osc52_sequence,
    run_scenario,
    static_resolve,
    tags_encode,
)

SCENARIOS = load_builtin_scenarios()
ATTACKS = [s for s in SCENARIOS if s.kind == "attack"]
BENIGN = [s for s in SCENARIOS if s.kind == "benign"]


class TestCorpusShape:
    def test_eleven_of_each(self):
        assert len(ATTACKS) == 11
        assert len(BENIGN) == 11

    def test_every_attack_has_a_benign_twin(self):
        attack_families = {s.family for s in ATTACKS}
        benign_families = {s.family for s in BENIGN}
        assert attack_families == benign_families

    def test_ids_unique(self):
        ids = [s.scenario_id for s in SCENARIOS]
        assert len(ids) == len(set(ids))


class TestLoader:
    def test_rejects_missing_fields(self):
        with pytest.raises(ScenarioFormatError):
            load_scenario({"scenario_id": "x", "title": "t", "kind": "attack"})

    def test_rejects_bad_kind(self):
        with pytest.raises(ScenarioFormatError):
            load_scenario(
                {"scenario_id": "x", "title": "t", "kind": "weird", "steps": [{"expect": {}}]}
            )

    def test_attack_requires_expectations(self):
        with pytest.raises(ScenarioFormatError):
            load_scenario(
                {
                    "scenario_id": "x",
                    "title": "t",
                    "kind": "attack",
                    "steps": [{"expect": {}}],
                }
            )

    def test_step_must_have_one_tag(self):
        with pytest.raises(ScenarioFormatError):
            load_scenario(
                {
                    "scenario_id": "x",
                    "title": "t",
                    "kind": "benign",
                    "steps": [{"tool_call": {}, "expect": {}}],
                }
            )


class TestConstructors:
    def test_tags_round_trip(self):
        from sentinel_gate.scanners import scan_unicode_smuggling

        encoded = tags_encode("hidden words")
        assert scan_unicode_smuggling(encoded)[0].payload == "hidden words"

    def test_osc52_carries_payload(self):
        from sentinel_gate.scanners import strip_ansi, FindingKind

        _, findings = strip_ansi(osc52_sequence("grab me"))
        assert findings[0].kind is FindingKind.ANSI_OSC52
        assert findings[0].payload == "grab me"

    def test_static_resolve_concat(self):
        assert static_resolve({"$concat": ["a", {"$tags": "b"}]}) == "a" + tags_encode("b")

    def test_static_resolve_rejects_session_refs(self):
        with pytest.raises(ScenarioFormatError):
            static_resolve({"$from_segment": "s1"})


@pytest.mark.parametrize("scenario", ATTACKS, ids=lambda s: s.scenario_id)
class TestAttacks:
    def test_monitored_blocks_at_expected_step(self, scenario):
        report = run_scenario(scenario, Mode.MONITORED)
        assert report.blocked_step == scenario.expected_block_step
        assert report.blocked_reason == scenario.expected_block_reason
        assert report.block_matches_expectation
        assert not report.exfil_observed
        assert report.expect_failures == 0

    def test_permissive_lets_exfil_through(self, scenario):
        report = run_scenario(scenario, Mode.PERMISSIVE)
        assert report.exfil_observed


@pytest.mark.parametrize("scenario", BENIGN, ids=lambda s: s.scenario_id)
class TestBenignTwins:
    def test_monitored_runs_clean(self, scenario):
        report = run_scenario(scenario, Mode.MONITORED)
        assert report.denials == 0
        assert report.blocked_step is None
        assert report.expect_failures == 0
        assert not report.exfil_observed


class TestDeterminism:
    @pytest.mark.parametrize("scenario", SCENARIOS[:4], ids=lambda s: s.scenario_id)
    def test_repeat_runs_share_digest(self, scenario):
        first = run_scenario(scenario, Mode.MONITORED)
        second = run_scenario(scenario, Mode.MONITORED)
        assert first.audit_digest == second.audit_digest


class TestReplayDriver:
    def _spaiware(self):
        sc = next(s for s in ATTACKS if s.scenario_id == "spaiware-memories")
        session, gw, task_id = build_session(sc, Mode.MONITORED)
        return sc, session, gw, ReplayDriver(sc, session, gw, task_id or sc.scenario_id)

    def test_pauses_on_escalation(self):
        sc, session, gw, driver = self._spaiware()
        driver.run_until_blocked()
        assert not driver.finished
        pending = [e for e in session.pending.values() if e.status == "pending"]
        assert len(pending) == 1

    def test_resume_noop_while_still_pending(self):
        sc, session, gw, driver = self._spaiware()
        driver.run_until_blocked()
        assert driver.resume() == []

    def test_approval_resumes_to_completion(self):
        sc, session, gw, driver = self._spaiware()
        driver.run_until_blocked()
        approval_id = next(
            a for a, e in session.pending.items() if e.status == "pending"
        )
        gw.resolve_approval(approval_id, True, "operator")
        driver.resume()
        assert driver.finished
        # Approving the memory write does not unblock the downstream exfil.
        assert not session.world.net.observed(sc.expected_exfil_marker)

    def test_denial_also_resumes(self):
        sc, session, gw, driver = self._spaiware()
        driver.run_until_blocked()
        approval_id = next(
            a for a, e in session.pending.items() if e.status == "pending"
        )
        gw.resolve_approval(approval_id, False, "operator")
        driver.resume()
        assert driver.finished
        assert not session.world.net.observed(sc.expected_exfil_marker)
