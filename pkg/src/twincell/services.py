"""Microservice register: command parsing, validation and runtime execution.

The registry is the lookup table of atomic operations; validate() is the
single definition of "error-free executable" used by the scoring harness.
Execution returns raw signal changes and event drafts; the orchestrator owns
piping them through the twin and the log.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import plant as plant_mod
from .errors import (
    ArityMismatch,
    CommandSyntaxError,
    DomainViolation,
    DuplicateService,
    ExecutionFault,
    NoWorkpieceAtReadyPosition,
    UnknownService,
)
from .plant import PlantState, SignalChange
from .twin import EventDraft

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_QUOTE_NEEDED = re.compile(r"""[,()'"]|^\s|\s$""")

# Coordination phrases emitted by the communication services.
COMM_INITIATED_TEXT = (
    "Communication initiated with the next operator to determine the subsequent action."
)
STATUS_BUSY_TEXT = "The next operator agent is busy processing another workpiece."
STATUS_READY_TEXT = "The next operator agent is ready."
HANDOVER_TEXT = "Workpiece control transferred to the next agent."


@dataclass
class Param:
    name: str
    kind: str                           # enum | integer | string
    domain: tuple | None = None         # enum values, or (min, max) for integer
    required: bool = True


@dataclass
class ServiceDescriptor:
    name: str
    description: str
    params: list[Param] = field(default_factory=list)
    target: str = "station"             # station | agent-local | system
    effect: str = "actuation"           # actuation | communication | no-op | alert
    duration_model: str = "immediate"   # immediate | timed:<param>
    announce: bool = True               # execution writes the call line event

    def signature(self) -> str:
        required = [p.name for p in self.params if p.required]
        return f"{self.name}({', '.join(required)})"


@dataclass
class Invocation:
    service: str                        # canonical name
    args: list = field(default_factory=list)
    issued_by: str = ""
    at: int = 0


@dataclass
class ExecutionResult:
    status: str                         # ok | rejected | failed
    detail: str = ""
    signal_changes: list[SignalChange] = field(default_factory=list)
    events: list[EventDraft] = field(default_factory=list)
    status_queries: list[tuple[int, str]] = field(default_factory=list)
    hold_until: int | None = None
    alert: bool = False


@dataclass
class ExecutionContext:
    """Everything execute() needs beyond the plant handle."""

    issued_by: str
    station_id: str = ""
    next_agent: str = ""
    comm_latency_ms: int = 900
    now: int = 0
    tags: list[str] = field(default_factory=list)


class ServiceRegistry:
    def __init__(self) -> None:
        self.services: dict[str, ServiceDescriptor] = {}
        self.aliases: dict[str, str] = {}

    def register(self, descriptor: ServiceDescriptor) -> None:
        if descriptor.name in self.services or descriptor.name in self.aliases:
            raise DuplicateService(descriptor.name)
        for param in descriptor.params:
            if param.kind == "enum" and not param.domain:
                raise ValueError(f"{descriptor.name}.{param.name}: empty enum domain")
        self.services[descriptor.name] = descriptor

    def register_alias(self, alias: str, canonical: str) -> None:
        if alias in self.services or alias in self.aliases:
            raise DuplicateService(alias)
        if canonical not in self.services:
            raise UnknownService(f"alias {alias!r} -> unregistered {canonical!r}")
        self.aliases[alias] = canonical

    def get(self, name: str) -> ServiceDescriptor:
        resolved = self.aliases.get(name, name)
        if resolved not in self.services:
            raise UnknownService(name)
        return self.services[resolved]

    def render_catalog(self, allowed: list[str]) -> str:
        """Deterministic "name: description" block for prompt assembly."""
        lines = []
        for name in allowed:
            desc = self.get(name)
            lines.append(f"`{desc.signature()}`: {desc.description}")
        return "\n".join(lines)


def parse_command(text: str) -> tuple[str, list[str]]:
    """Parse `name(arg, ...)` into (name, raw argument strings).

    Quotes around string arguments are optional; the registry is not
    consulted. Raises CommandSyntaxError for malformed text.
    """
    stripped = text.strip()
    open_paren = stripped.find("(")
    if open_paren <= 0:
        raise CommandSyntaxError(f"expected name(...): {text!r}")
    name = stripped[:open_paren].strip()
    if not _NAME_RE.match(name):
        raise CommandSyntaxError(f"bad service name: {name!r}")
    if not stripped.endswith(")"):
        raise CommandSyntaxError(f"unbalanced parentheses: {text!r}")
    body = stripped[open_paren + 1:-1]
    args = _split_args(body, text)
    return name, args


def _split_args(body: str, original: str) -> list[str]:
    if body.strip() == "":
        return []
    args: list[str] = []
    current: list[str] = []
    quoted = False

    def flush() -> None:
        nonlocal current, quoted
        if quoted:
            args.append("".join(current))
        else:
            text = "".join(current).strip()
            if text == "":
                raise CommandSyntaxError(f"empty argument: {original!r}")
            args.append(text)
        current = []
        quoted = False

    i = 0
    while i < len(body):
        ch = body[i]
        if ch in "'\"":
            # quoted segment with backslash escapes, decoded in place
            quote = ch
            i += 1
            while i < len(body) and body[i] != quote:
                if body[i] == "\\" and i + 1 < len(body):
                    current.append(body[i + 1])
                    i += 2
                else:
                    current.append(body[i])
                    i += 1
            if i >= len(body):
                raise CommandSyntaxError(f"unterminated quote: {original!r}")
            i += 1
            quoted = True
        elif ch == ",":
            flush()
            i += 1
        elif ch in "()":
            raise CommandSyntaxError(f"unbalanced parentheses: {original!r}")
        else:
            current.append(ch)
            i += 1
    flush()
    return args


def validate(registry: ServiceRegistry, name: str, raw_args: list[str],
             issued_by: str = "", at: int = 0) -> Invocation:
    """Resolve aliases, check arity and coerce each argument into its domain.

    A command that validates is, by definition, executable.
    """
    canonical = registry.aliases.get(name, name)
    if canonical not in registry.services:
        raise UnknownService(name)
    descriptor = registry.services[canonical]
    required = [p for p in descriptor.params if p.required]
    if len(raw_args) < len(required) or len(raw_args) > len(descriptor.params):
        raise ArityMismatch(
            f"{canonical} takes {len(required)}..{len(descriptor.params)} args, "
            f"got {len(raw_args)}")
    args = []
    for raw, param in zip(raw_args, descriptor.params):
        args.append(_coerce(canonical, param, raw))
    return Invocation(service=canonical, args=args, issued_by=issued_by, at=at)


def _coerce(service: str, param: Param, raw: str):
    if param.kind == "integer":
        if not re.fullmatch(r"-?\d+", raw):
            raise DomainViolation(f"{service}.{param.name}: {raw!r} is not an integer")
        value = int(raw)
        if param.domain:
            low, high = param.domain
            if not low <= value <= high:
                raise DomainViolation(
                    f"{service}.{param.name}: {value} outside {low}..{high}")
        return value
    if param.kind == "enum":
        if raw not in param.domain:
            raise DomainViolation(
                f"{service}.{param.name}: {raw!r} not in {list(param.domain)}")
        return raw
    return raw


def format_invocation(invocation: Invocation) -> str:
    """Canonical text form; round-trips through parse_command + validate."""
    rendered = []
    for arg in invocation.args:
        text = str(arg)
        if isinstance(arg, str) and (not text or _QUOTE_NEEDED.search(text)):
            text = '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'
        rendered.append(text)
    return f"{invocation.service}({', '.join(rendered)})"


def call_line(invocation: Invocation) -> str:
    return f"Operator agent calls the operation '{format_invocation(invocation)}'."


def execute(registry: ServiceRegistry, invocation: Invocation, plant: PlantState,
            ctx: ExecutionContext) -> ExecutionResult:
    """Carry out a validated invocation against the plant.

    Plant-rejected actuations come back as status "failed" with the plant
    untouched beyond the attempt; the invocation itself stays executable.
    """
    descriptor = registry.services.get(invocation.service)
    if descriptor is None:
        raise UnknownService(invocation.service)
    name = invocation.service
    now = ctx.now
    tags = list(ctx.tags)

    if name == "pass":
        return ExecutionResult(status="ok", detail="no-op")

    if name == "wait":
        duration_s = int(invocation.args[0])
        return ExecutionResult(status="ok", detail=f"hold {duration_s}s",
                               hold_until=now + duration_s * 1000)

    if name in ("communicate_with_agent", "communicate_with_next_agent"):
        target = (str(invocation.args[0]) if invocation.args else ctx.next_agent)
        if not target:
            return ExecutionResult(status="failed", detail="no next agent configured")
        draft = EventDraft(now, COMM_INITIATED_TEXT, tags + ["coordination"],
                           ctx.issued_by)
        return ExecutionResult(status="ok", detail=f"query {target}",
                               events=[draft],
                               status_queries=[(now + ctx.comm_latency_ms, target)])

    if name == "send_alert_to_human_supervisor":
        issue = str(invocation.args[0]) if invocation.args else "unspecified issue"
        draft = EventDraft(now, f"Alert sent to the human supervisor: {issue}",
                           tags + ["alert"], ctx.issued_by)
        return ExecutionResult(status="ok", detail=issue, events=[draft], alert=True)

    # Remaining services actuate the plant.
    target_id = ctx.station_id
    if name.startswith("agv_"):
        target_id = ctx.station_id  # AGV operators use their unit id as station
    try:
        changes = plant_mod.actuate(plant, target_id, name, invocation.args)
    except NoWorkpieceAtReadyPosition as exc:
        return ExecutionResult(status="failed", detail=str(exc))
    except Exception as exc:
        raise ExecutionFault(str(exc)) from exc

    events = []
    if name == "release_ready_workpiece_to_next_agent":
        events.append(EventDraft(now, HANDOVER_TEXT, tags + ["coordination"],
                                 ctx.issued_by))
    return ExecutionResult(status="ok", signal_changes=changes, events=events)


def render_status_text(busy: bool) -> str:
    return STATUS_BUSY_TEXT if busy else STATUS_READY_TEXT


def registry_from_dicts(data: dict) -> ServiceRegistry:
    """Build a registry from a parsed definition file (services + aliases)."""
    registry = ServiceRegistry()
    for entry in data.get("services", []):
        params = [Param(name=p["name"], kind=p["kind"],
                        domain=tuple(p["domain"]) if "domain" in p else None,
                        required=bool(p.get("required", True)))
                  for p in entry.get("params", [])]
        registry.register(ServiceDescriptor(
            name=entry["name"],
            description=entry["description"],
            params=params,
            target=entry.get("target", "station"),
            effect=entry.get("effect", "actuation"),
            duration_model=entry.get("duration_model", "immediate"),
            announce=bool(entry.get("announce", True)),
        ))
    for alias, canonical in data.get("aliases", {}).items():
        registry.register_alias(alias, canonical)
    return registry


def load_registry_file(path: str) -> ServiceRegistry:
    import yaml

    with open(path, encoding="utf-8") as handle:
        return registry_from_dicts(yaml.safe_load(handle))


def _shipped_registry_data() -> dict:
    import yaml
    from importlib import resources

    text = resources.files("twincell").joinpath(
        "data/registry/default.yaml").read_text(encoding="utf-8")
    return yaml.safe_load(text)


def default_registry() -> ServiceRegistry:
    """The shipped microservice catalog plus its alias spellings."""
    return registry_from_dicts(_shipped_registry_data())


# The operator-facing action list, in catalog order.
OPERATOR_SERVICES = [
    "conveyor_belt_run",
    "conveyor_belt_stop",
    "activate_material_holder",
    "deactivate_material_holder",
    "communicate_with_next_agent",
    "release_ready_workpiece_to_next_agent",
    "wait",
    "send_alert_to_human_supervisor",
    "pass",
    "rfid_read",
]
