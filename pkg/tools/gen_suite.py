#!/usr/bin/env python3
"""Generate the shipped 100-scenario evaluation suite (50 routine / 50 novel).

Deterministic: no RNG, variation comes from index arithmetic. Run from the
repository root; rewrites src/twincell/data/suites/suite100.yaml.
"""

from __future__ import annotations

from pathlib import Path

import yaml

OUT = Path(__file__).resolve().parent.parent / "src/twincell/data/suites/suite100.yaml"

SPEEDS = [0.2, 0.1, 0.25]
BUSY_OFFSETS_S = [0, 4, 9, 14]          # busy window length after spawn


def base_cell(next_busy_until: int) -> dict:
    agents = [
        {
            "id": "op_conveyor",
            "level": "operator",
            "station": "conveyor1",
            "prompt_profile": "conveyor_operator",
            "subscription": {"include_tags": ["conveyor1"], "window": 50},
        },
        {
            "id": "op_processing",
            "level": "operator",
            "station": "processing1",
            "prompt_profile": "idle_operator",
            "busy_until": next_busy_until,
            "subscription": {"include_tags": ["processing1"], "window": 50},
            "allowed_services": ["pass"],
        },
    ]
    return {"agents": agents}


def routine_scenario(index: int) -> dict:
    spawn_at = 12_000 + (index % 10) * 700
    speed = SPEEDS[index % len(SPEEDS)]
    busy_s = BUSY_OFFSETS_S[index % len(BUSY_OFFSETS_S)]
    busy_until = spawn_at + busy_s * 1000 if busy_s else 0
    cell = base_cell(busy_until)
    return {
        "id": f"routine_transport_{index:02d}",
        "category": "routine",
        "comm_latency_ms": 900,
        "rules": ["default"],
        "stations": [
            {"id": "conveyor1", "belt_length": 1.0, "belt_speed": speed,
             "next_agent": "op_processing", "rfid_check_delay_ms": 1000},
            {"id": "processing1"},
        ],
        "spawns": [{"at": spawn_at, "station": "conveyor1",
                    "workpiece": f"WP-1{index:02d}",
                    "cleared_for_processing": True}],
        "agents": cell["agents"],
        "end": {"terminal_command": "release_ready_workpiece_to_next_agent",
                "time_limit_ms": 90_000},
        "golden": {
            "notes": "Routine transport with handover once the neighbor is ready.",
            "decision_points": [
                {"trigger_contains": "Sensor BG56 detects an object at the entrance.",
                 "acceptable": ["conveyor_belt_run(forward, *)"],
                 "optimal": ["conveyor_belt_run(forward, 10)"]},
                {"trigger_contains": "The next operator agent is ready.",
                 "acceptable": ["release_ready_workpiece_to_next_agent()"],
                 "optimal": ["release_ready_workpiece_to_next_agent()"],
                 "terminal": True},
            ],
        },
    }


def stuck_scenario(index: int) -> dict:
    spawn_at = 12_000 + (index % 8) * 600
    cell = base_cell(0)
    return {
        "id": f"novel_stuck_{index:02d}",
        "category": "novel",
        "comm_latency_ms": 900,
        "rules": ["default", "extended"],
        "stations": [
            {"id": "conveyor1", "belt_length": 1.0, "belt_speed": 0.2,
             "next_agent": "op_processing", "rfid_check_delay_ms": 1000},
            {"id": "processing1"},
        ],
        "spawns": [{"at": spawn_at, "station": "conveyor1",
                    "workpiece": f"WP-2{index:02d}"}],
        "faults": [{"kind": "stuck_workpiece", "target": f"WP-2{index:02d}",
                    "at": spawn_at + 400 + (index % 3) * 300}],
        "agents": cell["agents"],
        "end": {"terminal_command": "send_alert_to_human_supervisor",
                "time_limit_ms": 90_000},
        "golden": {
            "notes": "Workpiece jams mid-belt; waiting is executable but only "
                     "an alert after the auto-stop is effective.",
            "decision_points": [
                {"trigger_contains": "The conveyor starts moving forward.",
                 "acceptable": ["wait(*)"], "optimal": ["wait(5)"]},
                {"trigger_contains": "The conveyor automatically stops.",
                 "acceptable": ["send_alert_to_human_supervisor(*)"],
                 "optimal": ["send_alert_to_human_supervisor(*)"],
                 "terminal": True},
            ],
        },
    }


def dropout_scenario(index: int) -> dict:
    spawn_at = 13_000 + (index % 5) * 800
    cell = base_cell(0)
    return {
        "id": f"novel_dropout_{index:02d}",
        "category": "novel",
        "comm_latency_ms": 900,
        "rules": ["default", "extended"],
        "stations": [
            {"id": "conveyor1", "belt_length": 1.0, "belt_speed": 0.2,
             "next_agent": "op_processing", "rfid_check_delay_ms": 1000},
            {"id": "processing1"},
        ],
        "spawns": [{"at": spawn_at, "station": "conveyor1",
                    "workpiece": f"WP-3{index:02d}"}],
        "faults": [{"kind": "sensor_dropout", "target": "conveyor1.BG51",
                    "at": spawn_at}],
        "agents": cell["agents"],
        "end": {"terminal_command": "send_alert_to_human_supervisor",
                "time_limit_ms": 90_000},
        "golden": {
            "notes": "Ready sensor drops out, so arrival is never observed; "
                     "the effective response is an alert after the auto-stop.",
            "decision_points": [
                {"trigger_contains": "The conveyor automatically stops.",
                 "acceptable": ["send_alert_to_human_supervisor(*)"],
                 "optimal": ["send_alert_to_human_supervisor(*)"],
                 "terminal": True},
            ],
        },
    }


def rejected_scenario(index: int) -> dict:
    spawn_at = 12_500 + (index % 6) * 500
    cell = base_cell(0)
    return {
        "id": f"novel_rejected_{index:02d}",
        "category": "novel",
        "comm_latency_ms": 900,
        "rules": ["default", "extended"],
        "stations": [
            {"id": "conveyor1", "belt_length": 1.0, "belt_speed": 0.2,
             "next_agent": "op_processing", "rfid_check_delay_ms": 1000},
            {"id": "processing1"},
        ],
        "spawns": [{"at": spawn_at, "station": "conveyor1",
                    "workpiece": f"WP-4{index:02d}",
                    "cleared_for_processing": False}],
        "agents": cell["agents"],
        "end": {"terminal_command": "send_alert_to_human_supervisor",
                "time_limit_ms": 90_000},
        "golden": {
            "notes": "RFID validation fails; the workpiece must be released "
                     "from the holder and the supervisor alerted.",
            "decision_points": [
                {"trigger_contains": "RFID check failed",
                 "acceptable": ["deactivate_material_holder()"]},
                {"trigger_contains": "RFID check failed",
                 "acceptable": ["send_alert_to_human_supervisor(*)"],
                 "optimal": ["send_alert_to_human_supervisor(*)"],
                 "terminal": True},
            ],
        },
    }


def surprise_arrival_scenario(index: int) -> dict:
    spawn_at = 11_000 + (index % 5) * 900
    busy_s = [0, 3][index % 2]
    busy_until = spawn_at + busy_s * 1000 if busy_s else 0
    cell = base_cell(busy_until)
    return {
        "id": f"novel_surprise_arrival_{index:02d}",
        "category": "novel",
        "comm_latency_ms": 900,
        "rules": ["default"],
        "stations": [
            {"id": "conveyor1", "belt_length": 1.0, "belt_speed": 0.2,
             "next_agent": "op_processing", "rfid_check_delay_ms": 1000},
            {"id": "processing1"},
        ],
        "spawns": [{"at": spawn_at, "station": "conveyor1",
                    "workpiece": f"WP-5{index:02d}", "offset": 0.97,
                    "cleared_for_processing": True}],
        "agents": cell["agents"],
        "end": {"terminal_command": "release_ready_workpiece_to_next_agent",
                "time_limit_ms": 90_000},
        "golden": {
            "notes": "A workpiece appears directly at the ready position "
                     "without an entrance detection; it must still be secured, "
                     "validated and handed over.",
            "decision_points": [
                {"trigger_contains": "Sensor BG51 at the ready position detects",
                 "acceptable": ["activate_material_holder()"]},
                {"trigger_contains": "The next operator agent is ready.",
                 "acceptable": ["release_ready_workpiece_to_next_agent()"],
                 "optimal": ["release_ready_workpiece_to_next_agent()"],
                 "terminal": True},
            ],
        },
    }


def build_suite() -> dict:
    scenarios = []
    scenarios += [routine_scenario(i) for i in range(50)]
    scenarios += [stuck_scenario(i) for i in range(15)]
    scenarios += [dropout_scenario(i) for i in range(10)]
    scenarios += [rejected_scenario(i) for i in range(15)]
    scenarios += [surprise_arrival_scenario(i) for i in range(10)]
    return {"suite": "suite100", "scenarios": scenarios}


def main() -> None:
    suite = build_suite()
    OUT.parent.mkdir(parents=True, exist_ok=True)
    with open(OUT, "w", encoding="utf-8") as handle:
        handle.write("# Generated by tools/gen_suite.py; do not edit by hand.\n")
        yaml.safe_dump(suite, handle, sort_keys=False, width=100)
    routine = sum(1 for s in suite["scenarios"] if s["category"] == "routine")
    novel = sum(1 for s in suite["scenarios"] if s["category"] == "novel")
    print(f"wrote {OUT} ({routine} routine / {novel} novel)")


if __name__ == "__main__":
    main()
