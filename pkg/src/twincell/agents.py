"""Agent construction: five-section prompts, backends, and output parsing.

Backends are interchangeable behind invoke(): the orchestrator's behavior
depends only on the returned text. The rule oracle lives in oracle.py.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass, field

import httpx

from .errors import (
    BackendUnavailable,
    EmptyPlan,
    MissingField,
    NoJsonFound,
    NonStringField,
    ReplayExhausted,
    UnknownAssignee,
)
from .eventlog import Subscription

_FENCE_RE = re.compile(r"```[a-zA-Z0-9_]*\n?|```")


@dataclass
class PromptTemplate:
    """Five prompt sections; the trailing cue is fixed at render time."""

    role_goal: str
    context: str = ""
    behavior: str = ""
    io_pattern: str = ""


@dataclass
class AgentSpec:
    id: str
    level: str                          # manager | operator
    prompt: PromptTemplate
    subscription: Subscription
    allowed_services: list[str] = field(default_factory=list)
    station: str | None = None
    next_agent: str | None = None
    busy_until: int = 0                 # scripted busy window for status queries

    def __post_init__(self) -> None:
        if self.level == "operator" and not self.station:
            raise ValueError(f"operator agent {self.id} needs a station")


@dataclass
class BackendDescriptor:
    kind: str                           # remote_api | scripted_replay | rule_oracle | adversarial
    model: str = ""
    endpoint: str = ""
    script_path: str = ""
    profile: str = "sop"                # rule_oracle: sop | sop_fallback
    max_output_tokens: int = 256
    temperature: float = 0.0
    retries: int = 2


@dataclass
class Decision:
    reason: str
    command: str
    raw: str


@dataclass
class PlanStep:
    id: str
    assignee: str
    instruction: str


@dataclass
class Plan:
    goal: str
    steps: list[PlanStep]


def build_prompt(spec: AgentSpec, catalog_text: str, excerpt_text: str,
                 active_step: str | None = None) -> str:
    """Deterministic five-section concatenation ending in the output cue.

    The input slot is filled exactly once; byte-stable for fixed inputs.
    """
    context = spec.prompt.context
    if catalog_text:
        context = f"{context}\n\nActions you can take:\n\n{catalog_text}" if context \
            else f"Actions you can take:\n\n{catalog_text}"
    if active_step:
        context = f"{context}\n\nCurrent plan step assigned to you: {active_step}"
    sections = [
        spec.prompt.role_goal,
        context,
        spec.prompt.behavior,
        spec.prompt.io_pattern,
        f"Now, you should generate a response:\n\nInput:\n\n{excerpt_text}\n\nOutput:\n",
    ]
    return "\n\n".join(s for s in sections if s)


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]


def _extract_first_json(text: str) -> dict:
    """First balanced JSON object in the text, tolerating prose and fences."""
    cleaned = _FENCE_RE.sub("", text)
    for start, ch in enumerate(cleaned):
        if ch != "{":
            continue
        depth = 0
        in_string = False
        escaped = False
        for end in range(start, len(cleaned)):
            c = cleaned[end]
            if escaped:
                escaped = False
            elif in_string:
                if c == "\\":
                    escaped = True
                elif c == '"':
                    in_string = False
            elif c == '"':
                in_string = True
            elif c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
                if depth == 0:
                    try:
                        obj = json.loads(cleaned[start:end + 1])
                    except json.JSONDecodeError:
                        break
                    if isinstance(obj, dict):
                        return obj
                    break
        continue
    raise NoJsonFound(f"no JSON object in: {text[:80]!r}")


def parse_decision(raw: str) -> Decision:
    """Parse {"reason": ..., "command": ...} out of model output."""
    obj = _extract_first_json(raw)
    extras = set(obj) - {"reason", "command"}
    if extras:
        raise MissingField(f"unexpected fields {sorted(extras)}")
    for key in ("reason", "command"):
        if key not in obj:
            raise MissingField(key)
        if not isinstance(obj[key], str):
            raise NonStringField(key)
    return Decision(reason=obj["reason"], command=obj["command"], raw=raw)


def format_decision(decision: Decision) -> str:
    return json.dumps({"reason": decision.reason, "command": decision.command})


def parse_plan(raw: str, known_operators: list[str]) -> Plan:
    """Parse {"goal": ..., "steps": [{id, assignee, instruction}...]}."""
    obj = _extract_first_json(raw)
    if "goal" not in obj or "steps" not in obj:
        raise MissingField("goal and steps are required")
    if not isinstance(obj["goal"], str):
        raise NonStringField("goal")
    steps_raw = obj["steps"]
    if not isinstance(steps_raw, list) or not steps_raw:
        raise EmptyPlan("plan has no steps")
    steps = []
    for i, entry in enumerate(steps_raw):
        if not isinstance(entry, dict):
            raise MissingField(f"steps[{i}] is not an object")
        for key in ("id", "assignee", "instruction"):
            if key not in entry:
                raise MissingField(f"steps[{i}].{key}")
            if not isinstance(entry[key], str):
                raise NonStringField(f"steps[{i}].{key}")
        if entry["assignee"] not in known_operators:
            raise UnknownAssignee(entry["assignee"])
        steps.append(PlanStep(entry["id"], entry["assignee"], entry["instruction"]))
    return Plan(goal=obj["goal"], steps=steps)


class Backend:
    """One text-generation backend instance, bound to an agent."""

    descriptor: BackendDescriptor

    def invoke(self, prompt: str) -> str:
        raise NotImplementedError


class RemoteApiBackend(Backend):
    """Single chat-completion request per invocation; credential from env."""

    def __init__(self, descriptor: BackendDescriptor,
                 client: httpx.Client | None = None):
        self.descriptor = descriptor
        self._client = client or httpx.Client(timeout=60.0)
        self._endpoint = descriptor.endpoint or os.environ.get("TWINCELL_LLM_ENDPOINT", "")
        self._model = descriptor.model or os.environ.get("TWINCELL_LLM_MODEL", "")

    def invoke(self, prompt: str) -> str:
        if not prompt:
            raise ValueError("empty prompt")
        if not self._endpoint:
            raise BackendUnavailable("no endpoint configured")
        headers = {}
        api_key = os.environ.get("TWINCELL_LLM_API_KEY")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        payload = {
            "model": self._model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.descriptor.temperature,
            "max_tokens": self.descriptor.max_output_tokens,
        }
        last_error: Exception | None = None
        for _ in range(self.descriptor.retries + 1):
            try:
                response = self._client.post(self._endpoint, json=payload,
                                             headers=headers)
                response.raise_for_status()
                body = response.json()
                return body["choices"][0]["message"]["content"]
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                last_error = exc
        raise BackendUnavailable(str(last_error))


class ScriptedReplayBackend(Backend):
    """Returns recorded responses in order, checking prompt digests."""

    def __init__(self, descriptor: BackendDescriptor,
                 script: list[tuple[str, str]] | None = None):
        self.descriptor = descriptor
        if script is None:
            script = load_replay_script(descriptor.script_path)
        self._script = list(script)
        self._cursor = 0

    def invoke(self, prompt: str) -> str:
        if self._cursor >= len(self._script):
            raise ReplayExhausted(f"no response left at step {self._cursor}")
        digest, response = self._script[self._cursor]
        if digest and digest != prompt_digest(prompt):
            raise ReplayExhausted(
                f"prompt digest mismatch at step {self._cursor}: "
                f"recorded {digest}, got {prompt_digest(prompt)}")
        self._cursor += 1
        return response


class AdversarialBackend(Backend):
    """Calibration backend: always emits prose, never a parsable decision."""

    def __init__(self, descriptor: BackendDescriptor):
        self.descriptor = descriptor

    def invoke(self, prompt: str) -> str:
        return "Sure! I will take care of it right away."


def load_replay_script(path: str) -> list[tuple[str, str]]:
    """Ordered (prompt digest, response) pairs from a transcript file."""
    script: list[tuple[str, str]] = []
    pending_digest = ""
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if record.get("kind") == "prompt":
                pending_digest = record.get("digest", "")
            elif record.get("kind") == "response":
                script.append((pending_digest, record["text"]))
                pending_digest = ""
    return script


def make_backend(descriptor: BackendDescriptor, spec: AgentSpec) -> Backend:
    if descriptor.kind == "remote_api":
        return RemoteApiBackend(descriptor)
    if descriptor.kind == "scripted_replay":
        return ScriptedReplayBackend(descriptor)
    if descriptor.kind == "adversarial":
        return AdversarialBackend(descriptor)
    if descriptor.kind == "rule_oracle":
        from .oracle import RuleOracleBackend
        return RuleOracleBackend(descriptor, spec)
    raise ValueError(f"unknown backend kind {descriptor.kind!r}")


def parse_backend_arg(text: str) -> BackendDescriptor:
    """CLI shorthand: "rule_oracle", "rule_oracle:fallback", "replay:<path>",
    "adversarial", "remote:<model>"."""
    kind, _, rest = text.partition(":")
    if kind == "rule_oracle":
        profile = "sop_fallback" if rest in ("fallback", "sop_fallback") else "sop"
        return BackendDescriptor(kind="rule_oracle", profile=profile)
    if kind in ("replay", "scripted_replay"):
        return BackendDescriptor(kind="scripted_replay", script_path=rest)
    if kind == "adversarial":
        return BackendDescriptor(kind="adversarial")
    if kind in ("remote", "remote_api"):
        return BackendDescriptor(kind="remote_api", model=rest)
    raise ValueError(f"unknown backend {text!r}")
