"""Control loop: advance the plant, enrich changes into events, route events
to subscribed agents, gate their decisions and execute the results.

Virtual time never advances while an agent is deciding (pause_clock); the
buffer_events mode instead defers execution by a configured inference
latency so later events land in the next excerpt.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import plant as plant_mod
from .agents import (
    AgentSpec,
    Backend,
    BackendDescriptor,
    Decision,
    Plan,
    build_prompt,
    make_backend,
    parse_decision,
    parse_plan,
    prompt_digest,
)
from .errors import (
    AgentError,
    AlreadyResolved,
    BackendUnavailable,
    OrchestratorError,
    RegistryError,
    ReplayExhausted,
    UnknownApproval,
    UnknownService,
)
from .eventlog import EventLog, EventRecord
from .oracle import RuleOracleBackend
from .plant import SUBSTEP_MS
from .scenarios import ScenarioSpec
from .services import (
    ExecutionContext,
    ExecutionResult,
    Invocation,
    ServiceRegistry,
    call_line,
    default_registry,
    execute,
    format_invocation,
    parse_command,
    render_status_text,
    validate,
)
from .twin import DataPool, EventDraft, Signal, observe


@dataclass
class RunConfig:
    approval_mode: str = "auto"             # auto | human
    debounce_ms: int = 0                    # 0 = trigger on every event
    inference_pause: str = "pause_clock"    # pause_clock | buffer_events
    inference_latency_ms: int = 500         # buffer_events only
    max_decisions: int = 200

    def __post_init__(self) -> None:
        if self.max_decisions < 1:
            raise ValueError("max_decisions must be >= 1")


@dataclass
class PendingApproval:
    id: str
    agent_id: str
    decision: Decision
    invocation: Invocation
    created_at: int
    status: str = "pending"                 # pending | approved | rejected
    result: ExecutionResult | None = None


@dataclass
class AgentRuntime:
    spec: AgentSpec
    backend: Backend
    last_seen_seq: int = 0
    hold_until: int | None = None
    debounce_due: int | None = None
    active_step: str | None = None


@dataclass
class DeferredStatus:
    at: int
    target: str
    tags: list[str]


class SessionTranscript:
    """Replayable, line-delimited record of everything a session did."""

    def __init__(self, scenario_id: str, backend: str):
        self.meta = {"kind": "meta", "scenario": scenario_id, "backend": backend}
        self.records: list[dict] = []

    def add(self, kind: str, **fields) -> dict:
        record = {"kind": kind, **fields}
        self.records.append(record)
        return record

    def of_kind(self, kind: str) -> list[dict]:
        return [r for r in self.records if r["kind"] == kind]

    def event_lines(self) -> list[str]:
        return [f"{r['timestamp']} {r['text']}" for r in self.of_kind("event")]

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.meta, sort_keys=True)]
        lines += [json.dumps(r, sort_keys=True) for r in self.records]
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SessionTranscript":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        meta = json.loads(lines[0])
        transcript = cls(meta.get("scenario", ""), meta.get("backend", ""))
        transcript.meta = meta
        transcript.records = [json.loads(line) for line in lines[1:] if line.strip()]
        return transcript

    def diff(self, other: "SessionTranscript") -> list[str]:
        """Differences between record streams; meta is intentionally excluded."""
        problems = []
        for index, (mine, theirs) in enumerate(zip(self.records, other.records)):
            if mine != theirs:
                problems.append(f"record {index}: {mine} != {theirs}")
        if len(self.records) != len(other.records):
            problems.append(f"record count {len(self.records)} != {len(other.records)}")
        return problems


class Session:
    """One scenario run: owns the plant, the twin layers and the agents."""

    def __init__(self, scenario: ScenarioSpec, backend: BackendDescriptor,
                 config: RunConfig | None = None,
                 registry: ServiceRegistry | None = None):
        self.scenario = scenario
        self.backend_descriptor = backend
        self.config = config or RunConfig()
        self.registry = registry or default_registry()
        self.plant = scenario.build_plant()
        self.rules = scenario.build_rules()
        self.pool = DataPool()
        self._seed_pool()
        self.log = EventLog()
        self.transcript = SessionTranscript(scenario.id, backend.kind)
        self.agents: dict[str, AgentRuntime] = {}
        shared_backend: Backend | None = None
        operators = scenario.operator_ids()
        for agent_config in scenario.agents:
            spec = agent_config.spec
            if backend.kind == "scripted_replay":
                if shared_backend is None:
                    shared_backend = make_backend(backend, spec)
                instance = shared_backend
            elif backend.kind == "rule_oracle":
                instance = RuleOracleBackend(backend, spec, operators)
            else:
                instance = make_backend(backend, spec)
            self.agents[spec.id] = AgentRuntime(spec=spec, backend=instance)
        self.deferred_status: list[DeferredStatus] = []
        self.buffered: list[tuple[int, str, Invocation]] = []
        self.approvals: dict[str, PendingApproval] = {}
        self._approval_seq = 0
        self._spawned: set[int] = set()
        self._task_fired = False
        self.decisions = 0
        self.status = "running"
        self.plan: Plan | None = None
        future = frozenset(s.workpiece for s in scenario.spawns)
        for fault in scenario.faults:
            plant_mod.inject_fault(self.plant, fault, future_workpieces=future)

    def _seed_pool(self) -> None:
        # Baseline values without history entries so only real edges enrich.
        for address, value in plant_mod.read_signals(self.plant).items():
            self.pool.current[address] = Signal(address, value, 0)

    # --- event plumbing ---------------------------------------------------

    def _append(self, draft: EventDraft) -> EventRecord:
        record = self.log.append(draft)
        self.transcript.add(
            "event", seq=record.seq, at=record.at, timestamp=record.timestamp_text,
            source=record.source, tags=list(record.tags), text=record.text)
        return record

    def _station_tags(self, spec: AgentSpec) -> list[str]:
        return [spec.station] if spec.station else [spec.id]

    def _ingest_and_observe(self, changes) -> list[EventDraft]:
        applied = self.pool.ingest(changes)
        return observe(applied, self.rules)

    # --- stepping ---------------------------------------------------------

    def step(self) -> str:
        """Advance one 100 ms sub-step and settle every resulting decision."""
        if self.status != "running":
            return self.status
        changes = plant_mod.advance(self.plant, SUBSTEP_MS)
        now = self.plant.clock.now
        changes += self._due_spawns(now)
        drafts = self._due_status_responses(now) + self._ingest_and_observe(changes)
        drafts.sort(key=lambda d: d.at)
        for draft in drafts:
            self._append(draft)
        self._fire_user_task(now)
        self._release_buffered(now)
        if self.status == "running":
            self._process_agents(now)
        self._check_end(now)
        return self.status

    def run(self, approval_callback=None) -> SessionTranscript:
        """Step until the scenario ends; optionally auto-resolve approvals."""
        self._fire_user_task(self.plant.clock.now)
        if self.status == "running":
            self._process_agents(self.plant.clock.now)
        while self.status in ("running", "awaiting_approval"):
            if self.status == "awaiting_approval":
                pending = self.pending_approvals()
                if approval_callback is None:
                    break
                for approval in pending:
                    self.resolve_approval(approval.id, approval_callback(approval))
                continue
            self.step()
        self.transcript.meta["status"] = self.status
        return self.transcript

    def _due_spawns(self, now: int):
        changes = []
        for index, spawn in enumerate(self.scenario.spawns):
            if index in self._spawned or spawn.at > now:
                continue
            self._spawned.add(index)
            changes += plant_mod.spawn_workpiece(
                self.plant, spawn.station, spawn.workpiece,
                offset=spawn.offset,
                cleared_for_processing=spawn.cleared_for_processing)
        return changes

    def _due_status_responses(self, now: int) -> list[EventDraft]:
        due = [d for d in self.deferred_status if d.at <= now]
        self.deferred_status = [d for d in self.deferred_status if d.at > now]
        drafts = []
        for entry in due:
            busy = self._agent_busy(entry.target, entry.at)
            drafts.append(EventDraft(entry.at, render_status_text(busy),
                                     entry.tags, entry.target))
        return drafts

    def _agent_busy(self, agent_id: str, at: int) -> bool:
        runtime = self.agents.get(agent_id)
        if runtime is None:
            return False
        if runtime.spec.busy_until > at:
            return True
        return runtime.hold_until is not None and runtime.hold_until > at

    # --- user tasks and plans ----------------------------------------------

    def _manager(self) -> AgentRuntime | None:
        for agent_id in sorted(self.agents):
            if self.agents[agent_id].spec.level == "manager":
                return self.agents[agent_id]
        return None

    def _fire_user_task(self, now: int) -> None:
        task = self.scenario.user_task
        if task is None or self._task_fired or task.at > now:
            return
        self._task_fired = True
        self.handle_user_task(task.text)

    def handle_user_task(self, text: str) -> Plan | None:
        """Append the task event, ask the manager for a plan, dispatch steps."""
        if not text.strip():
            raise ValueError("empty task text")
        now = self.plant.clock.now
        self._append(EventDraft(now, f"User task received: {text}", ["task"], "user"))
        manager = self._manager()
        if manager is None:
            self._append(EventDraft(now, "No manager agent registered; task ignored.",
                                    ["task", "error"], "orchestrator"))
            return None
        excerpt = self.log.excerpt(manager.spec.subscription)
        catalog = self.registry.render_catalog(manager.spec.allowed_services)
        prompt = build_prompt(manager.spec, catalog, excerpt)
        manager.last_seen_seq = self.log.last_seq()
        self.transcript.add("prompt", at=now, agent=manager.spec.id,
                            digest=prompt_digest(prompt), text=prompt)
        self.decisions += 1
        try:
            raw = manager.backend.invoke(prompt)
        except (BackendUnavailable, ReplayExhausted) as exc:
            self.transcript.add("response", at=now, agent=manager.spec.id,
                                digest=prompt_digest(prompt), text="",
                                error=type(exc).__name__)
            self.status = "failed"
            return None
        self.transcript.add("response", at=now, agent=manager.spec.id,
                            digest=prompt_digest(prompt), text=raw)
        try:
            plan = parse_plan(raw, self.scenario.operator_ids())
        except AgentError as exc:
            self.transcript.add("verdict", at=now, agent=manager.spec.id,
                                executable=False, error=type(exc).__name__)
            self._append(EventDraft(
                now, f"Plan could not be parsed: {type(exc).__name__}.",
                ["task", "error"], manager.spec.id))
            return None
        self.transcript.add("verdict", at=now, agent=manager.spec.id,
                            executable=True, error=None)
        self.transcript.add(
            "plan", at=now, agent=manager.spec.id, goal=plan.goal,
            steps=[{"id": s.id, "assignee": s.assignee, "instruction": s.instruction}
                   for s in plan.steps])
        for step in plan.steps:
            self._append(EventDraft(
                now, f"Plan step {step.id} assigned to {step.assignee}: "
                     f"{step.instruction}", ["task", "plan", step.assignee],
                manager.spec.id))
        for step in plan.steps:
            runtime = self.agents.get(step.assignee)
            if runtime and runtime.active_step is None:
                runtime.active_step = f"{step.id}: {step.instruction}"
        self.plan = plan
        return plan

    # --- decisions ----------------------------------------------------------

    def _process_agents(self, now: int) -> None:
        for _ in range(50):
            invoked = False
            for agent_id in sorted(self.agents):
                if self.status != "running":
                    return
                runtime = self.agents[agent_id]
                if self._should_invoke(runtime, now):
                    self._invoke(runtime, now)
                    invoked = True
            if not invoked:
                return
        raise OrchestratorError("decision livelock: agents keep re-triggering")

    def _should_invoke(self, runtime: AgentRuntime, now: int) -> bool:
        if runtime.spec.level == "manager":
            return False
        if runtime.hold_until is not None:
            return now >= runtime.hold_until
        new = self.log.records(runtime.last_seen_seq)
        matching = [r for r in new if runtime.spec.subscription.matches(r)]
        if not matching:
            return False
        if self.config.debounce_ms:
            if runtime.debounce_due is None:
                runtime.debounce_due = now + self.config.debounce_ms
            return now >= runtime.debounce_due
        return True

    def _invoke(self, runtime: AgentRuntime, now: int) -> None:
        runtime.hold_until = None
        runtime.debounce_due = None
        excerpt = self.log.excerpt(runtime.spec.subscription)
        catalog = self.registry.render_catalog(runtime.spec.allowed_services)
        prompt = build_prompt(runtime.spec, catalog, excerpt, runtime.active_step)
        runtime.last_seen_seq = self.log.last_seq()
        digest = prompt_digest(prompt)
        agent_id = runtime.spec.id
        self.transcript.add("prompt", at=now, agent=agent_id, digest=digest,
                            text=prompt)
        self.decisions += 1
        try:
            raw = runtime.backend.invoke(prompt)
        except (BackendUnavailable, ReplayExhausted) as exc:
            self.transcript.add("response", at=now, agent=agent_id, digest=digest,
                                text="", error=type(exc).__name__)
            self.status = "failed"
            return
        self.transcript.add("response", at=now, agent=agent_id, digest=digest,
                            text=raw)
        try:
            decision = parse_decision(raw)
        except AgentError as exc:
            self.transcript.add("decision", at=now, agent=agent_id, reason="",
                                command="", error=type(exc).__name__)
            self.transcript.add("verdict", at=now, agent=agent_id,
                                executable=False, error=type(exc).__name__)
            return
        self.transcript.add("decision", at=now, agent=agent_id,
                            reason=decision.reason, command=decision.command,
                            error=None)
        try:
            name, raw_args = parse_command(decision.command)
            invocation = validate(self.registry, name, raw_args,
                                  issued_by=agent_id, at=now)
            if invocation.service not in runtime.spec.allowed_services:
                raise UnknownService(
                    f"{invocation.service} not allowed for {agent_id}")
        except RegistryError as exc:
            self.transcript.add("verdict", at=now, agent=agent_id,
                                executable=False, error=type(exc).__name__)
            return
        self.transcript.add("verdict", at=now, agent=agent_id, executable=True,
                            error=None, command=format_invocation(invocation))
        if self.config.approval_mode == "human":
            self._request_approval(runtime, decision, invocation, now)
            return
        if self.config.inference_pause == "buffer_events":
            self.buffered.append(
                (now + self.config.inference_latency_ms, agent_id, invocation))
            return
        self._execute(runtime, invocation)

    def _release_buffered(self, now: int) -> None:
        due = [b for b in self.buffered if b[0] <= now]
        self.buffered = [b for b in self.buffered if b[0] > now]
        for _, agent_id, invocation in due:
            invocation.at = now
            self._execute(self.agents[agent_id], invocation)

    def _request_approval(self, runtime: AgentRuntime, decision: Decision,
                          invocation: Invocation, now: int) -> None:
        self._approval_seq += 1
        approval = PendingApproval(
            id=f"ap-{self._approval_seq}", agent_id=runtime.spec.id,
            decision=decision, invocation=invocation, created_at=now)
        self.approvals[approval.id] = approval
        self.transcript.add("approval", at=now, id=approval.id,
                            agent=runtime.spec.id, action="requested",
                            command=format_invocation(invocation))
        self.status = "awaiting_approval"

    def pending_approvals(self) -> list[PendingApproval]:
        return [a for a in self.approvals.values() if a.status == "pending"]

    def resolve_approval(self, approval_id: str, verdict: str,
                         actor: str = "supervisor") -> ExecutionResult | None:
        approval = self.approvals.get(approval_id)
        if approval is None:
            raise UnknownApproval(approval_id)
        if approval.status != "pending":
            raise AlreadyResolved(approval_id)
        if verdict not in ("approved", "rejected"):
            raise ValueError(f"verdict must be approved|rejected, got {verdict!r}")
        approval.status = verdict
        now = self.plant.clock.now
        self.transcript.add("approval", at=now, id=approval.id,
                            agent=approval.agent_id, action=verdict, actor=actor)
        runtime = self.agents[approval.agent_id]
        if self.status == "awaiting_approval" and not self.pending_approvals():
            self.status = "running"
        if verdict == "rejected":
            self._append(EventDraft(
                now, "Command rejected by the human supervisor.",
                self._station_tags(runtime.spec) + ["approval"], actor))
            return None
        approval.invocation.at = now
        approval.result = self._execute(runtime, approval.invocation)
        return approval.result

    def _execute(self, runtime: AgentRuntime, invocation: Invocation) -> ExecutionResult:
        now = self.plant.clock.now
        spec = runtime.spec
        station = self.plant.stations.get(spec.station or "")
        next_agent = spec.next_agent or (station.next_agent if station else "")
        tags = self._station_tags(spec)
        ctx = ExecutionContext(
            issued_by=spec.id, station_id=spec.station or spec.id,
            next_agent=next_agent,
            comm_latency_ms=self.scenario.comm_latency_ms, now=now, tags=tags)
        descriptor = self.registry.get(invocation.service)
        if descriptor.announce:
            self._append(EventDraft(now, call_line(invocation), tags, spec.id))
        result = execute(self.registry, invocation, self.plant, ctx)
        if result.signal_changes:
            for draft in self._ingest_and_observe(result.signal_changes):
                self._append(draft)
        for draft in result.events:
            self._append(draft)
        for due_at, target in result.status_queries:
            self.deferred_status.append(
                DeferredStatus(at=due_at, target=target,
                               tags=tags + ["coordination"]))
        if result.hold_until is not None:
            runtime.hold_until = result.hold_until
        self.transcript.add("execution", at=now, agent=spec.id,
                            command=format_invocation(invocation),
                            status=result.status, detail=result.detail,
                            alert=result.alert)
        terminal = self.scenario.end.terminal_command
        if terminal and invocation.service == terminal and result.status == "ok":
            self.status = "finished"
        return result

    # --- termination ---------------------------------------------------------

    def _check_end(self, now: int) -> None:
        if self.status != "running":
            return
        if self.decisions >= self.config.max_decisions:
            self.status = "decision_cap"
            return
        if now >= self.scenario.end.time_limit_ms:
            self.status = "time_limit"
            return
        if self._quiescent(now):
            self.status = "deadlock"
            self.transcript.add("deadlock", at=now,
                                detail="no events, timers or pending work left")

    def _quiescent(self, now: int) -> bool:
        if len(self._spawned) < len(self.scenario.spawns):
            return False
        if self.scenario.user_task and not self._task_fired:
            return False
        if self.deferred_status or self.buffered or self.pending_approvals():
            return False
        for runtime in self.agents.values():
            if runtime.hold_until is not None or runtime.debounce_due is not None:
                return False
            if runtime.spec.level == "manager":
                continue
            unseen = self.log.records(runtime.last_seen_seq)
            if any(runtime.spec.subscription.matches(r) for r in unseen):
                return False
        if any(st.belt_state != "stopped" or st.pending_effects
               for st in self.plant.stations.values()):
            return False
        if any(agv.transit_timer_ms > 0 for agv in self.plant.agvs.values()):
            return False
        if self.plant.pending_faults:
            return False
        return True


def run_scenario(scenario: ScenarioSpec, backend: BackendDescriptor,
                 config: RunConfig | None = None,
                 approval_callback=None) -> SessionTranscript:
    session = Session(scenario, backend, config)
    return session.run(approval_callback=approval_callback)
