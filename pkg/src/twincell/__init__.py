"""Event-driven agent control of a simulated modular production cell.

Layers: plant simulation -> signal pool -> semantic events -> chronological
log -> manager/operator agents -> validated microservice execution, plus a
scenario evaluation harness and an HTTP gateway.
"""

__version__ = "0.1.0"

from .agents import BackendDescriptor, Decision, Plan, build_prompt, parse_decision
from .errors import TwincellError
from .eventlog import EventLog, Subscription
from .orchestrator import RunConfig, Session, SessionTranscript, run_scenario
from .plant import PlantState, advance, read_signals, spawn_workpiece
from .scenarios import ScenarioSpec, load_suite, resolve_scenario
from .services import ServiceRegistry, default_registry, parse_command, validate
from .twin import DataPool, EnrichmentRule, observe

__all__ = [
    "BackendDescriptor", "DataPool", "Decision", "EnrichmentRule", "EventLog",
    "Plan", "PlantState", "RunConfig", "ScenarioSpec", "ServiceRegistry",
    "Session", "SessionTranscript", "Subscription", "TwincellError", "advance",
    "build_prompt", "default_registry", "load_suite", "observe",
    "parse_command", "parse_decision", "read_signals", "resolve_scenario",
    "run_scenario", "spawn_workpiece", "validate",
]
