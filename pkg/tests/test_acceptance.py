"""Acceptance suite: one test per shipped exit criterion.

Each test prints a PASS line on success (run with -s or check test_output).
Criteria run on the shipped scenarios and the full 100-scenario suite.
"""

from __future__ import annotations

import random
import time

import httpx
import pytest

from conftest import make_conveyor_plant
from twincell import cli
from twincell import plant as plant_mod
from twincell.agents import BackendDescriptor
from twincell.errors import (
    ArityMismatch,
    CommandSyntaxError,
    DomainViolation,
    RegistryError,
    UnknownService,
)
from twincell.evalharness import (
    format_report,
    load_suite,
    run_suite,
    score_executable,
)
from twincell.eventlog import EventLog, format_timestamp
from twincell.oracle import extract_input_block
from twincell.orchestrator import SessionTranscript, run_scenario
from twincell.plant import advance, brute_force_sensors, read_signals, spawn_workpiece
from twincell.scenarios import load_packaged_scenario, read_data_text
from twincell.services import default_registry, format_invocation, parse_command, validate
from twincell.twin import EventDraft

ORACLE = BackendDescriptor(kind="rule_oracle")
FALLBACK = BackendDescriptor(kind="rule_oracle", profile="sop_fallback")
ADVERSARIAL = BackendDescriptor(kind="adversarial")


def _shipped_runs() -> list[tuple[str, object, BackendDescriptor]]:
    runs = [("appendix_a", load_packaged_scenario("appendix_a"), ORACLE),
            ("stuck_workpiece", load_packaged_scenario("stuck_workpiece"), FALLBACK),
            ("transport_task", load_packaged_scenario("transport_task"), FALLBACK)]
    runs += [(s.id, s, FALLBACK) for s in load_suite("suite100")]
    return runs


@pytest.fixture(scope="module")
def shipped_transcripts() -> dict[str, SessionTranscript]:
    return {name: run_scenario(scenario, backend)
            for name, scenario, backend in _shipped_runs()}


def _ok(name: str) -> None:
    print(f"ACCEPTANCE PASS: {name}")


def test_acceptance_appendix_a_golden_replay(golden_lines):
    started = time.perf_counter()
    transcript = run_scenario(load_packaged_scenario("appendix_a"), ORACLE)
    elapsed = time.perf_counter() - started
    lines = transcript.event_lines()
    assert lines[:len(golden_lines)] == golden_lines, "event log diverges from fixture"
    ready_line = "[00:00:26] The next operator agent is ready."
    assert lines.count(ready_line) == 1, "ready line must occur exactly once"
    prompts = [r for r in transcript.records if r["kind"] == "prompt"]
    assert extract_input_block(prompts[-1]["text"]).splitlines() == golden_lines
    executions = [r for r in transcript.records if r["kind"] == "execution"]
    assert executions[-1]["command"] == "release_ready_workpiece_to_next_agent()"
    assert executions[-1]["status"] == "ok"
    assert transcript.meta["status"] == "finished"
    assert elapsed < 5.0, f"golden replay took {elapsed:.2f}s"
    _ok("appendix_a golden replay (exact match, validated release, "
        f"{elapsed * 1000:.0f} ms)")


def test_acceptance_stuck_workpiece_behavior():
    transcript = run_scenario(load_packaged_scenario("stuck_workpiece"), FALLBACK)
    events = transcript.of_kind("event")
    executions = [r for r in transcript.records if r["kind"] == "execution"]
    start_at = next(e["at"] for e in events
                    if e["text"] == "The conveyor starts moving forward.")
    stop_at = next(e["at"] for e in events
                   if e["text"] == "The conveyor automatically stops.")
    waits = [e["at"] for e in executions if e["command"].startswith("wait(")]
    alerts = [e["at"] for e in executions
              if e["command"].startswith("send_alert_to_human_supervisor(")]
    assert any(start_at <= at < stop_at for at in waits), \
        "no wait decision while the belt was running"
    assert alerts and min(alerts) >= stop_at, "no alert after the auto-stop"
    assert not any("BG51" in e["text"] for e in events), "BG51 fired unexpectedly"
    _ok("stuck workpiece: wait while running, alert after auto-stop")


MALFORMED_CORPUS = [
    ("conveyor_belt_run(forward, 10", CommandSyntaxError),
    ("wait(5))", CommandSyntaxError),
    ("wait 5", CommandSyntaxError),
    ("(5)", CommandSyntaxError),
    ("wait(", CommandSyntaxError),
    ("wait)", CommandSyntaxError),
    ("", CommandSyntaxError),
    ("   ", CommandSyntaxError),
    ("wait(5) trailing", CommandSyntaxError),
    ("wa it(5)", CommandSyntaxError),
    ("9wait(5)", CommandSyntaxError),
    ("wait((5)", CommandSyntaxError),
    ("wait(5,)", CommandSyntaxError),
    ('wait("5)', CommandSyntaxError),
    ("teleport_workpiece()", UnknownService),
    ("conveyor_belt_reverse(10)", UnknownService),
    ("do_magic(now)", UnknownService),
    ("conveyor_belt_run(sideways, 10)", DomainViolation),
    ("conveyor_belt_run(forward, fast)", DomainViolation),
    ("conveyor_belt_run(forward, 0)", DomainViolation),
    ("wait(-3)", DomainViolation),
    ("conveyor_belt_run(forward)", ArityMismatch),
    ("conveyor_belt_run(forward, 10, 1)", ArityMismatch),
    ("wait()", ArityMismatch),
    ("pass(1)", ArityMismatch),
]

ROUND_TRIP = [
    "conveyor_belt_run(forward, 10)",
    "conveyor_belt_run(backward, 60)",
    "conveyor_belt_stop()",
    "activate_material_holder()",
    "deactivate_material_holder()",
    "communicate_with_agent(op_processing)",
    "communicate_with_next_agent()",
    "release_workpiece_to_next_agent()",
    "release_ready_workpiece_to_next_agent()",
    "wait(5)",
    "send_alert_to_human_supervisor(jam)",
    "pass()",
    "rfid_read()",
    "activate_conveyor(forward, 10)",
    "release_workpiece()",
    "ask_next_operator()",
]


def test_acceptance_parser_validator_suite():
    registry = default_registry()
    for text in ROUND_TRIP:
        name, args = parse_command(text)
        invocation = validate(registry, name, args)
        name2, args2 = parse_command(format_invocation(invocation))
        again = validate(registry, name2, args2)
        assert (again.service, again.args) == (invocation.service, invocation.args), text
    assert len(MALFORMED_CORPUS) >= 20
    for text, expected in MALFORMED_CORPUS:
        with pytest.raises(expected):
            name, args = parse_command(text)
            validate(registry, name, args)
        # every malformed case rejects with a RegistryError subclass
        assert issubclass(expected, RegistryError)
    _ok(f"parser/validator: {len(ROUND_TRIP)} round-trips, "
        f"{len(MALFORMED_CORPUS)} malformed cases rejected")


def test_acceptance_determinism(shipped_transcripts):
    for name, scenario, backend in _shipped_runs():
        again = run_scenario(scenario, backend)
        assert shipped_transcripts[name].to_jsonl() == again.to_jsonl(), \
            f"{name}: transcripts differ between runs"
    _ok(f"determinism: {len(shipped_transcripts)} shipped scenarios "
        "byte-identical across two runs")


def test_acceptance_event_log_invariants(shipped_transcripts):
    for name, transcript in shipped_transcripts.items():
        events = transcript.of_kind("event")
        seqs = [e["seq"] for e in events]
        ats = [e["at"] for e in events]
        assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs), name
        assert all(a <= b for a, b in zip(ats, ats[1:])), name
        for event in events:
            assert event["timestamp"] == format_timestamp(event["at"]), name
        log = EventLog()
        for event in events:
            log.append(EventDraft(event["at"], event["text"],
                                  event["tags"], event["source"]))
        unmatched = log.state_pair_check("secures the position of the workpiece",
                                         "releases the workpiece")
        assert unmatched == [], f"{name}: unmatched hold/release pairs"
    _ok(f"event-log invariants hold on {len(shipped_transcripts)} shipped scenarios")


def test_acceptance_evaluation_protocol(monkeypatch):
    scenarios = load_suite("suite100")
    assert len(scenarios) == 100
    routine = [s for s in scenarios if s.category == "routine"]
    novel = [s for s in scenarios if s.category == "novel"]
    assert (len(routine), len(novel)) == (50, 50)

    oracle_report = run_suite(scenarios, FALLBACK)
    assert oracle_report.executable_rate("routine") == 1.0
    assert oracle_report.effective_rate("routine") == 1.0

    adversarial_report = run_suite(scenarios, ADVERSARIAL)
    assert adversarial_report.executable_rate() == 0.0

    hand_built = SessionTranscript("hand", "synthetic")
    for i in range(44):
        hand_built.add("verdict", at=i, agent="a", executable=True, error=None)
    for i in range(6):
        hand_built.add("verdict", at=44 + i, agent="a", executable=False,
                       error="NoJsonFound")
    assert score_executable(hand_built) == 0.88

    # a configured remote backend still yields a Figure-style report
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(200, json={"choices": [{"message": {
            "content": '{"reason":"r","command":"pass()"}'}}]})

    stub_client = httpx.Client(transport=httpx.MockTransport(handler))
    monkeypatch.setattr("twincell.agents.httpx.Client",
                        lambda *a, **kw: stub_client)
    remote = BackendDescriptor(kind="remote_api", endpoint="https://llm.test/v1",
                               model="stub-model")
    remote_report = run_suite(scenarios[:2], remote)
    table = format_report([oracle_report, adversarial_report, remote_report])
    assert "remote[stub-model]" in table
    assert "100%" in table and "0%" in table
    _ok("evaluation protocol: 50/50 split, oracle 100%/100% routine, "
        "adversarial 0%, 44/50 = 88%, remote report emitted")


def test_acceptance_simulator_oracle_equivalence():
    rng = random.Random(20_240_811)
    mismatches = 0
    for trial in range(1000):
        plant = make_conveyor_plant()
        spawn_workpiece(plant, "conveyor1", "W1",
                        offset=round(rng.uniform(0.0, 1.0), 3))
        for _ in range(rng.randint(1, 12)):
            roll = rng.random()
            if roll < 0.3:
                plant_mod.actuate(plant, "conveyor1", "conveyor_belt_run",
                                  [rng.choice(["forward", "backward"]),
                                   rng.randint(1, 10)])
            elif roll < 0.4:
                plant_mod.actuate(plant, "conveyor1", "conveyor_belt_stop", [])
            elif roll < 0.5:
                try:
                    plant_mod.actuate(plant, "conveyor1",
                                      "activate_material_holder", [])
                except Exception:
                    pass
            elif roll < 0.6:
                plant_mod.actuate(plant, "conveyor1",
                                  "deactivate_material_holder", [])
            else:
                advance(plant, rng.randint(1, 40) * 100)
            signals = read_signals(plant)
            for address, expected in brute_force_sensors(plant).items():
                if signals[address] != expected:
                    mismatches += 1
    assert mismatches == 0
    _ok("simulator oracle equivalence: 1000 randomized sequences, 0 mismatches")


def test_acceptance_gateway_contract(tmp_path, capsys):
    transcript_path = tmp_path / "appendix_a.jsonl"
    assert cli.main(["run", "appendix_a", "--backend", "rule_oracle",
                     "--transcript", str(transcript_path)]) == 0
    assert cli.main(["replay", str(transcript_path)]) == 0

    import yaml
    suite = yaml.safe_load(read_data_text("suites/suite100.yaml"))
    suite["scenarios"] = suite["scenarios"][:4]
    suite_path = tmp_path / "mini.yaml"
    suite_path.write_text(yaml.safe_dump(suite, sort_keys=False))
    assert cli.main(["eval", str(suite_path), "--backend", "rule_oracle:fallback",
                     "--min-executable", "1.0", "--min-effective", "1.0"]) == 0
    capsys.readouterr()

    from fastapi.testclient import TestClient
    from twincell.gateway import GatewayConfig, create_app
    with TestClient(create_app(GatewayConfig())) as client:
        session_id = client.post("/sessions", json={
            "scenario": "appendix_a", "backend": "rule_oracle"}).json()["id"]
        deadline = time.monotonic() + 5
        while time.monotonic() < deadline:
            if client.get(f"/sessions/{session_id}").json()["status"] == "finished":
                break
            time.sleep(0.02)
        full = client.get(f"/sessions/{session_id}/events?since=0").json()["events"]
        # interleave two pollers over the same log with independent cursors
        seen_a, seen_b = [], []
        cursor_a = cursor_b = 0
        for _ in range(50):
            body_a = client.get(
                f"/sessions/{session_id}/events?since={cursor_a}").json()
            chunk_a = body_a["events"][:2]
            if chunk_a:
                seen_a.extend(chunk_a)
                cursor_a = chunk_a[-1]["seq"]
            body_b = client.get(
                f"/sessions/{session_id}/events?since={cursor_b}").json()
            chunk_b = body_b["events"][:3]
            if chunk_b:
                seen_b.extend(chunk_b)
                cursor_b = chunk_b[-1]["seq"]
            if not chunk_a and not chunk_b:
                break
        for seen in (seen_a, seen_b):
            assert [e["seq"] for e in seen] == [e["seq"] for e in full], \
                "cursor reads must partition the log without gaps or duplicates"
    _ok("gateway contract: CLI run/eval/replay green, /events partitions "
        "under interleaved polling")
