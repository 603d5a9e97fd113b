"""Digital-twin data layer: signal pool plus rule-driven semantic enrichment.

Raw signal changes are matched against declarative rules (address glob plus
old/new value conditions) and rendered into one-line natural-language event
drafts for the chronological log.
"""

from __future__ import annotations

import fnmatch
import re
import string
from dataclasses import dataclass, field

from .errors import DuplicateRuleId, TemplateResolutionFailure, TimeRegression
from .plant import SignalChange, SignalValue

ADDRESS_RE = re.compile(r"^[A-Za-z0-9_]+(\.[A-Za-z0-9_]+)*$")

# Placeholders resolvable from a matched change. {station}/{component}/{tag}
# are the address segments; {old}/{new} are the values.
_ALLOWED_PLACEHOLDERS = {"station", "component", "tag", "old", "new", "address"}

_MATCH_ANY = object()


@dataclass
class Signal:
    address: str
    value: SignalValue
    at: int


@dataclass
class EventDraft:
    """A rendered event waiting to be appended to the log."""

    at: int
    text: str
    tags: list[str]
    source: str


@dataclass
class EnrichmentRule:
    id: str
    address: str                       # glob, e.g. "*.BG56.detected"
    template: str
    tags: list[str] = field(default_factory=list)
    source: str = "data_observer"
    new: SignalValue | object = _MATCH_ANY
    old: SignalValue | object = _MATCH_ANY
    new_not: SignalValue | object = _MATCH_ANY

    def matches(self, change: SignalChange) -> bool:
        if not fnmatch.fnmatchcase(change.address, self.address):
            return False
        if self.new is not _MATCH_ANY and change.new_value != self.new:
            return False
        if self.old is not _MATCH_ANY and change.old_value != self.old:
            return False
        if self.new_not is not _MATCH_ANY and change.new_value == self.new_not:
            return False
        return True

    def placeholders(self) -> set[str]:
        names = set()
        for text in (self.template, *self.tags):
            for _, name, _, _ in string.Formatter().parse(text):
                if name is not None:
                    names.add(name)
        return names


def _context(change: SignalChange) -> dict[str, SignalValue]:
    parts = change.address.split(".")
    return {
        "address": change.address,
        "station": parts[0],
        "component": parts[1] if len(parts) > 1 else "",
        "tag": parts[-1],
        "old": change.old_value,
        "new": change.new_value,
    }


def register_rule(rules: list[EnrichmentRule], rule: EnrichmentRule) -> list[EnrichmentRule]:
    """Append a rule after validating id uniqueness and template placeholders."""
    if any(r.id == rule.id for r in rules):
        raise DuplicateRuleId(rule.id)
    unknown = rule.placeholders() - _ALLOWED_PLACEHOLDERS
    if unknown:
        raise TemplateResolutionFailure(
            f"rule {rule.id}: unresolvable placeholders {sorted(unknown)}")
    return [*rules, rule]


def observe(changes: list[SignalChange], rules: list[EnrichmentRule]) -> list[EventDraft]:
    """Render every (change, matching rule) pair into an event draft.

    Drafts are ordered by change time, then rule registration order; changes
    matching no rule yield nothing.
    """
    drafts: list[tuple[int, int, EventDraft]] = []
    for change in changes:
        ctx = _context(change)
        for index, rule in enumerate(rules):
            if not rule.matches(change):
                continue
            try:
                text = rule.template.format(**ctx)
                tags = [t.format(**ctx) for t in rule.tags]
            except (KeyError, IndexError) as exc:  # registration should prevent this
                raise TemplateResolutionFailure(f"rule {rule.id}: {exc}") from exc
            drafts.append((change.at, index, EventDraft(change.at, text, tags, rule.source)))
    drafts.sort(key=lambda item: (item[0], item[1]))
    return [d for _, _, d in drafts]


class DataPool:
    """Centralized signal repository: current values plus append-only history."""

    def __init__(self) -> None:
        self.current: dict[str, Signal] = {}
        self.history: list[SignalChange] = []

    def last_at(self) -> int:
        return self.history[-1].at if self.history else 0

    def update_signal(self, address: str, value: SignalValue, at: int) -> SignalChange | None:
        """Store a value; returns a change iff it differs from the stored one."""
        if not ADDRESS_RE.match(address):
            raise ValueError(f"bad signal address {address!r}")
        if at < self.last_at():
            raise TimeRegression(f"write at {at} before history end {self.last_at()}")
        stored = self.current.get(address)
        old = stored.value if stored else None
        self.current[address] = Signal(address, value, at)
        if stored is not None and old == value:
            return None
        change = SignalChange(address, old, value, at)
        self.history.append(change)
        return change

    def ingest(self, changes: list[SignalChange]) -> list[SignalChange]:
        """Apply plant-produced changes, deduplicating no-op writes."""
        out = []
        for change in changes:
            applied = self.update_signal(change.address, change.new_value, change.at)
            if applied is not None:
                out.append(applied)
        return out


def rules_from_dicts(entries: list[dict], existing: list[EnrichmentRule] | None = None) -> list[EnrichmentRule]:
    """Build a rule list from parsed YAML entries, validating each."""
    rules = list(existing) if existing else []
    for entry in entries:
        match = entry.get("match", {})
        rule = EnrichmentRule(
            id=entry["id"],
            address=match.get("address", "*"),
            template=entry["template"],
            tags=list(entry.get("tags", [])),
            source=entry.get("source", "data_observer"),
            new=match["new"] if "new" in match else _MATCH_ANY,
            old=match["old"] if "old" in match else _MATCH_ANY,
            new_not=match["new_not"] if "new_not" in match else _MATCH_ANY,
        )
        rules = register_rule(rules, rule)
    return rules
