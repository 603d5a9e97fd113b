"""Exception taxonomy shared across the package.

Parser/validator errors map one-to-one onto the "non-executable" verdict
classes used by the evaluation harness, so their names are part of the
scoring contract.
"""

from __future__ import annotations


class TwincellError(Exception):
    """Base class for all package errors."""


# --- plant simulation ---------------------------------------------------

class PlantError(TwincellError):
    pass


class EntranceOccupied(PlantError):
    """Spawn target entrance window already holds a workpiece."""


class NoWorkpieceAtReadyPosition(PlantError):
    """Holder or RFID actuation targeted an empty ready window."""


class UnknownTarget(PlantError):
    """Fault references a workpiece or sensor that does not exist."""


class InvalidFaultTime(PlantError):
    """Fault scheduled before the current virtual time."""


# --- twin / data pool ---------------------------------------------------

class TwinError(TwincellError):
    pass


class TimeRegression(TwinError):
    """Write or append with a timestamp earlier than the last one."""


class DuplicateRuleId(TwinError):
    pass


class TemplateResolutionFailure(TwinError):
    """Enrichment template references a placeholder that cannot resolve."""


# --- service registry ---------------------------------------------------

class RegistryError(TwincellError):
    pass


class DuplicateService(RegistryError):
    pass


class CommandSyntaxError(RegistryError):
    """Command text is not of the form name(arg, ...)."""


class UnknownService(RegistryError):
    pass


class ArityMismatch(RegistryError):
    pass


class DomainViolation(RegistryError):
    """Argument failed kind coercion or domain membership."""


class ExecutionFault(RegistryError):
    """Plant rejected an otherwise valid actuation."""


# --- agents ---------------------------------------------------------------

class AgentError(TwincellError):
    pass


class NoJsonFound(AgentError):
    pass


class MissingField(AgentError):
    """Decision/plan JSON lacks a required field or carries extras."""


class NonStringField(AgentError):
    pass


class UnknownAssignee(AgentError):
    pass


class EmptyPlan(AgentError):
    pass


class BackendUnavailable(AgentError):
    pass


class ReplayExhausted(AgentError):
    """Scripted replay has no recorded response left for the prompt."""


# --- orchestration / evaluation ------------------------------------------

class OrchestratorError(TwincellError):
    pass


class ScenarioDeadlock(OrchestratorError):
    """No pending events, timers or wakeups but the scenario is incomplete."""


class PlanParseFailure(OrchestratorError):
    pass


class UnknownApproval(OrchestratorError):
    pass


class AlreadyResolved(OrchestratorError):
    pass


class SchemaError(TwincellError):
    """Scenario/suite/rule file failed validation; message carries location."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class UnmatchedDecisionPoint(TwincellError):
    """Golden spec references a triggering event the transcript never saw."""
