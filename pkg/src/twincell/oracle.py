"""Deterministic rule-driven backend encoding the operator's standard
operation procedure.

The oracle lets the whole repository test hermetically without model access.
It reads the event-log excerpt out of the prompt's input slot, scans it
backwards for the most recent substantive event, and maps that situation to
one command. The "sop_fallback" profile adds the published fallback rules
for situations outside the routine procedure:

  * conveyor running but the workpiece not yet at the ready position -> wait(5)
  * conveyor auto-stopped without a ready detection -> alert the supervisor
  * RFID validation failed -> release the holder, then alert the supervisor
"""

from __future__ import annotations

import json
import re

from .agents import AgentSpec, Backend, BackendDescriptor

_LINE_RE = re.compile(r"^\[(\d{2}):(\d{2}):(\d{2})\]\s+(.*)$")
_CALL_RE = re.compile(r"calls the operation '([A-Za-z_][A-Za-z0-9_]*)\(")

WAIT_SECONDS = 5


def _decision(reason: str, command: str) -> str:
    return json.dumps({"reason": reason, "command": command})


def extract_input_block(prompt: str) -> str:
    """The text between the final "Input:" marker and the "Output:" cue."""
    head, sep, tail = prompt.rpartition("Input:")
    if not sep:
        return prompt
    tail = tail.rsplit("Output:", 1)[0]
    return tail.strip()


def _event_lines(excerpt: str) -> list[str]:
    lines = []
    for raw in excerpt.splitlines():
        match = _LINE_RE.match(raw.strip())
        if match:
            lines.append(match.group(4).strip())
    return lines


def _called_operation(line: str) -> str | None:
    match = _CALL_RE.search(line)
    return match.group(1) if match else None


class RuleOracleBackend(Backend):
    """SOP-rule reimplementation of the operator (and a minimal manager)."""

    def __init__(self, descriptor: BackendDescriptor, spec: AgentSpec,
                 operators: list[str] | None = None):
        self.descriptor = descriptor
        self.spec = spec
        self.operators = operators or []
        self.fallback = descriptor.profile == "sop_fallback"

    def invoke(self, prompt: str) -> str:
        excerpt = extract_input_block(prompt)
        if self.spec.level == "manager":
            return self._manager_plan(excerpt)
        return self._operator_decision(_event_lines(excerpt))

    def _manager_plan(self, excerpt: str) -> str:
        task = ""
        for line in _event_lines(excerpt):
            if "User task received:" in line:
                task = line.split("User task received:", 1)[1].strip()
        assignee = self.operators[0] if self.operators else ""
        plan = {
            "goal": task or "standard transport",
            "steps": [
                {"id": "s1", "assignee": assignee,
                 "instruction": "Transport the incoming workpiece to the ready "
                                "position and validate it."},
                {"id": "s2", "assignee": assignee,
                 "instruction": "Hand the validated workpiece over to the next "
                                "operator agent."},
            ],
        }
        return json.dumps(plan)

    def _operator_decision(self, lines: list[str]) -> str:
        last = None
        last_index = -1
        for index in range(len(lines) - 1, -1, -1):
            if _called_operation(lines[index]) is None:
                last = lines[index]
                last_index = index
                break
        if last is None:
            return _decision("No observable event yet.", "pass()")

        if "Sensor BG56 detects an object at the entrance" in last:
            return _decision(
                "Workpiece detected at the entrance; transport it to the ready "
                "position.", "conveyor_belt_run(forward, 10)")
        if "Sensor BG51 at the ready position detects the workpiece" in last:
            return _decision(
                "Workpiece at the ready position; secure it in place.",
                "activate_material_holder()")
        if "Holder H1 secures the position of the workpiece" in last:
            return _decision(
                "Workpiece held; read its ID to validate processing.",
                "rfid_read()")
        if "RFID check is successful" in last:
            return _decision(
                "Workpiece cleared; check the status of the next operator.",
                "ask_next_operator()")
        if "The next operator agent is busy" in last:
            waited = any(_called_operation(line) == "wait"
                         for line in lines[last_index + 1:])
            if waited:
                return _decision(
                    "Wait period over; check the next operator again.",
                    "ask_next_operator()")
            return _decision(
                "Next operator busy; wait before asking again.",
                f"wait({WAIT_SECONDS})")
        if "The next operator agent is ready" in last:
            return _decision(
                "Next operator ready; hand over the workpiece.",
                "release_ready_workpiece_to_next_agent()")

        if self.fallback:
            fallback = self._fallback_decision(lines, last, last_index)
            if fallback is not None:
                return fallback
        return _decision("No action required for this event.", "pass()")

    def _fallback_decision(self, lines: list[str], last: str,
                           last_index: int) -> str | None:
        if "The conveyor starts moving" in last:
            return _decision(
                "Conveyor running; wait for the workpiece to arrive.",
                f"wait({WAIT_SECONDS})")
        if "conveyor" in last and "stops" in last:
            started = [i for i, line in enumerate(lines)
                       if "The conveyor starts moving" in line]
            start_index = started[-1] if started else 0
            arrived = any("Sensor BG51 at the ready position detects" in line
                          for line in lines[start_index:])
            if not arrived:
                return _decision(
                    "Conveyor stopped but the workpiece never reached the ready "
                    "position; escalate.",
                    'send_alert_to_human_supervisor("Workpiece did not reach the '
                    'ready position after the conveyor run; possible jam.")')
            return None
        if "RFID check failed" in last:
            return _decision(
                "Workpiece failed validation; release the holder before "
                "escalating.", "deactivate_material_holder()")
        if "Holder H1 releases the workpiece" in last:
            rejected = any("RFID check failed" in line for line in lines)
            if rejected:
                return _decision(
                    "Released the rejected workpiece; escalate to the "
                    "supervisor.",
                    'send_alert_to_human_supervisor("Workpiece failed RFID '
                    'validation and was released from the holder.")')
            return None
        return None
