"""Scenario, suite and rule-set files: the shared declarative container format.

Every replayable test situation is a YAML document carrying plant topology,
event triggers, the agents with their prompts, an end condition and a golden
spec with acceptable commands per decision point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from .agents import AgentSpec, PromptTemplate
from .errors import SchemaError
from .eventlog import Subscription
from .plant import AgvUnit, ConveyorStation, FaultSpec, PlantState, Workpiece, build_plant
from .services import OPERATOR_SERVICES
from .twin import EnrichmentRule, rules_from_dicts

_CATEGORIES = ("routine", "novel")


def _data_root():
    return resources.files("twincell").joinpath("data")


def read_data_text(relative: str) -> str:
    return _data_root().joinpath(relative).read_text(encoding="utf-8")


@dataclass
class SpawnEvent:
    at: int
    station: str
    workpiece: str
    offset: float = 0.0
    cleared_for_processing: bool = True


@dataclass
class UserTask:
    text: str
    at: int = 0


@dataclass
class DecisionPoint:
    trigger_contains: str
    acceptable: list[str]
    optimal: list[str] = field(default_factory=list)
    terminal: bool = False


@dataclass
class GoldenSpec:
    decision_points: list[DecisionPoint]
    notes: str = ""

    def terminal_point(self) -> DecisionPoint | None:
        for point in self.decision_points:
            if point.terminal:
                return point
        return self.decision_points[-1] if self.decision_points else None


@dataclass
class EndCondition:
    terminal_command: str = ""
    time_limit_ms: int = 60_000


@dataclass
class AgentConfig:
    spec: AgentSpec
    prompt_profile: str = ""


@dataclass
class ScenarioSpec:
    id: str
    category: str
    stations: list[dict]
    agents: list[AgentConfig]
    agvs: list[dict] = field(default_factory=list)
    workpieces: list[dict] = field(default_factory=list)
    spawns: list[SpawnEvent] = field(default_factory=list)
    faults: list[FaultSpec] = field(default_factory=list)
    user_task: UserTask | None = None
    rules: list[str] = field(default_factory=lambda: ["default"])
    extra_rules: list[dict] = field(default_factory=list)
    comm_latency_ms: int = 900
    end: EndCondition = field(default_factory=EndCondition)
    golden: GoldenSpec = field(default_factory=lambda: GoldenSpec([]))

    def build_plant(self) -> PlantState:
        stations = [ConveyorStation(**entry) for entry in self.stations]
        agvs = [AgvUnit(**entry) for entry in self.agvs]
        pieces = [Workpiece(**entry) for entry in self.workpieces]
        return build_plant(stations, agvs, pieces)

    def build_rules(self) -> list[EnrichmentRule]:
        rules: list[EnrichmentRule] = []
        for name in self.rules:
            entries = yaml.safe_load(read_data_text(f"rules/{name}.yaml"))
            rules = rules_from_dicts(entries["rules"], rules)
        if self.extra_rules:
            rules = rules_from_dicts(self.extra_rules, rules)
        return rules

    def operator_ids(self) -> list[str]:
        return [a.spec.id for a in self.agents if a.spec.level == "operator"]


def _require(entry: dict, key: str, location: str):
    if key not in entry:
        raise SchemaError(f"missing key {key!r}", location)
    return entry[key]


def load_prompt_profile(name: str) -> PromptTemplate:
    data = yaml.safe_load(read_data_text(f"prompts/{name}.yaml"))
    return PromptTemplate(
        role_goal=data.get("role_goal", ""),
        context=data.get("context", ""),
        behavior=data.get("behavior", ""),
        io_pattern=data.get("io_pattern", ""),
    )


def _agent_from_dict(entry: dict, location: str) -> AgentConfig:
    agent_id = _require(entry, "id", location)
    level = entry.get("level", "operator")
    profile = entry.get("prompt_profile", "")
    if "prompt" in entry:
        prompt = PromptTemplate(**entry["prompt"])
    elif profile:
        prompt = load_prompt_profile(profile)
    else:
        raise SchemaError("agent needs prompt or prompt_profile", location)
    sub_raw = entry.get("subscription", {})
    subscription = Subscription(
        agent_id=agent_id,
        include_tags=list(sub_raw.get("include_tags", [])),
        window=int(sub_raw.get("window", 50)),
    )
    spec = AgentSpec(
        id=agent_id,
        level=level,
        prompt=prompt,
        subscription=subscription,
        allowed_services=list(entry.get("allowed_services", OPERATOR_SERVICES)),
        station=entry.get("station"),
        next_agent=entry.get("next_agent"),
        busy_until=int(entry.get("busy_until", 0)),
    )
    return AgentConfig(spec=spec, prompt_profile=profile)


def scenario_from_dict(data: dict, location: str = "scenario") -> ScenarioSpec:
    scenario_id = _require(data, "id", location)
    location = f"{location}[{scenario_id}]"
    category = data.get("category", "routine")
    if category not in _CATEGORIES:
        raise SchemaError(f"category must be one of {_CATEGORIES}", location)
    stations = _require(data, "stations", location)
    if not isinstance(stations, list) or not stations:
        raise SchemaError("stations must be a non-empty list", location)
    agents_raw = _require(data, "agents", location)
    agents = [_agent_from_dict(a, f"{location}.agents[{i}]")
              for i, a in enumerate(agents_raw)]
    station_ids = {s["id"] for s in stations}
    for agent in agents:
        if agent.spec.station and agent.spec.station not in station_ids:
            raise SchemaError(f"agent {agent.spec.id} references unknown station "
                              f"{agent.spec.station!r}", location)

    spawns = [SpawnEvent(
        at=int(s["at"]), station=s["station"], workpiece=s["workpiece"],
        offset=float(s.get("offset", 0.0)),
        cleared_for_processing=bool(s.get("cleared_for_processing", True)),
    ) for s in data.get("spawns", [])]
    faults = [FaultSpec(
        kind=f["kind"], target=f["target"], at=int(f["at"]),
        detail=f.get("detail", ""),
    ) for f in data.get("faults", [])]

    task_raw = data.get("user_task")
    user_task = UserTask(text=task_raw["text"], at=int(task_raw.get("at", 0))) \
        if task_raw else None

    end_raw = data.get("end", {})
    end = EndCondition(
        terminal_command=end_raw.get("terminal_command", ""),
        time_limit_ms=int(end_raw.get("time_limit_ms", 60_000)),
    )

    golden_raw = data.get("golden")
    if golden_raw is None:
        raise SchemaError("golden spec is required", location)
    points = [DecisionPoint(
        trigger_contains=_require(p, "trigger_contains", f"{location}.golden[{i}]"),
        acceptable=list(_require(p, "acceptable", f"{location}.golden[{i}]")),
        optimal=list(p.get("optimal", [])),
        terminal=bool(p.get("terminal", False)),
    ) for i, p in enumerate(golden_raw.get("decision_points", []))]
    golden = GoldenSpec(decision_points=points, notes=golden_raw.get("notes", ""))

    return ScenarioSpec(
        id=scenario_id,
        category=category,
        stations=stations,
        agents=agents,
        agvs=data.get("agvs", []),
        workpieces=data.get("workpieces", []),
        spawns=spawns,
        faults=faults,
        user_task=user_task,
        rules=list(data.get("rules", ["default"])),
        extra_rules=list(data.get("extra_rules", [])),
        comm_latency_ms=int(data.get("comm_latency_ms", 900)),
        end=end,
        golden=golden,
    )


def load_scenario_file(path: str | Path) -> ScenarioSpec:
    with open(path, encoding="utf-8") as handle:
        data = yaml.safe_load(handle)
    if not isinstance(data, dict):
        raise SchemaError("scenario file must hold a mapping", str(path))
    return scenario_from_dict(data, str(path))


def load_packaged_scenario(name: str) -> ScenarioSpec:
    try:
        text = read_data_text(f"scenarios/{name}.yaml")
    except FileNotFoundError:
        raise SchemaError("scenario not found", name) from None
    data = yaml.safe_load(text)
    return scenario_from_dict(data, f"scenarios/{name}.yaml")


def resolve_scenario(ref: str, scenario_dir: str | Path | None = None) -> ScenarioSpec:
    """Accept a packaged scenario name, a file path, or a name in a directory."""
    path = Path(ref)
    if path.suffix in (".yaml", ".yml") and path.exists():
        return load_scenario_file(path)
    if scenario_dir:
        candidate = Path(scenario_dir) / f"{ref}.yaml"
        if candidate.exists():
            return load_scenario_file(candidate)
    return load_packaged_scenario(ref)


def load_suite(path: str | Path) -> list[ScenarioSpec]:
    """Load an evaluation suite with stable ordering and unique ids."""
    if isinstance(path, str) and not Path(path).exists():
        try:
            text = read_data_text(f"suites/{path}.yaml")
        except FileNotFoundError:
            raise SchemaError("suite file not found", str(path)) from None
        data = yaml.safe_load(text)
        location = f"suites/{path}.yaml"
    else:
        with open(path, encoding="utf-8") as handle:
            data = yaml.safe_load(handle)
        location = str(path)
    if not isinstance(data, dict) or "scenarios" not in data:
        raise SchemaError("suite file must carry a scenarios list", location)
    entries = data["scenarios"]
    if not isinstance(entries, list) or not entries:
        raise SchemaError("scenarios list is empty", location)
    seen: set[str] = set()
    scenarios = []
    for i, entry in enumerate(entries):
        scenario = scenario_from_dict(entry, f"{location}[{i}]")
        if scenario.id in seen:
            raise SchemaError(f"duplicate scenario id {scenario.id!r}", location)
        seen.add(scenario.id)
        scenarios.append(scenario)
    return scenarios
