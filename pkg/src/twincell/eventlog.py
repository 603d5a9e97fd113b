"""Chronological event log memory with subscriptions and prompt excerpts.

Events are instantaneous one-liners; durative facts appear only as open and
close entries (holder engages / holder releases), which state_pair_check can
audit.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field

from .errors import TimeRegression
from .twin import EventDraft


def format_timestamp(at_ms: int) -> str:
    """Render virtual ms as "[HH:MM:SS]" rounded down to whole seconds."""
    total = at_ms // 1000
    hours, rest = divmod(total, 3600)
    minutes, seconds = divmod(rest, 60)
    return f"[{hours:02d}:{minutes:02d}:{seconds:02d}]"


@dataclass(frozen=True)
class EventRecord:
    seq: int
    at: int
    timestamp_text: str
    source: str
    text: str
    tags: tuple[str, ...]

    def line(self) -> str:
        return f"{self.timestamp_text} {self.text}"

    def to_dict(self) -> dict:
        return {
            "seq": self.seq, "at": self.at, "source": self.source,
            "tags": list(self.tags), "text": self.text,
        }


@dataclass
class Subscription:
    agent_id: str
    include_tags: list[str] = field(default_factory=list)  # empty = all
    window: int = 50

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError("subscription window must be >= 1")

    def matches(self, record: EventRecord) -> bool:
        if not self.include_tags:
            return True
        return bool(set(self.include_tags) & set(record.tags))


class EventLog:
    """Append-only, single-writer log; readers always see a consistent prefix."""

    def __init__(self) -> None:
        self._records: list[EventRecord] = []
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._records)

    def append(self, draft: EventDraft) -> EventRecord:
        if "\n" in draft.text:
            raise ValueError("event text must be a single line")
        with self._lock:
            if self._records and draft.at < self._records[-1].at:
                raise TimeRegression(
                    f"append at {draft.at} before log end {self._records[-1].at}")
            record = EventRecord(
                seq=len(self._records) + 1,
                at=draft.at,
                timestamp_text=format_timestamp(draft.at),
                source=draft.source,
                text=draft.text,
                tags=tuple(draft.tags),
            )
            self._records.append(record)
            return record

    def records(self, since_seq: int = 0) -> list[EventRecord]:
        """Records with seq > since_seq, in order (snapshot, safe to iterate)."""
        with self._lock:
            if since_seq <= 0:
                return list(self._records)
            return [r for r in self._records if r.seq > since_seq]

    def last_seq(self) -> int:
        with self._lock:
            return self._records[-1].seq if self._records else 0

    def excerpt(self, subscription: Subscription) -> str:
        """The last `window` matching records, oldest first, one per line."""
        matching = [r for r in self.records() if subscription.matches(r)]
        tail = matching[-subscription.window:]
        return "\n".join(r.line() for r in tail)

    def state_pair_check(self, open_pattern: str, close_pattern: str) -> list[EventRecord]:
        """Open events with no later matching close event (FIFO pairing)."""
        open_re = re.compile(open_pattern)
        close_re = re.compile(close_pattern)
        unmatched: list[EventRecord] = []
        for record in self.records():
            if open_re.search(record.text):
                unmatched.append(record)
            elif close_re.search(record.text) and unmatched:
                unmatched.pop(0)
        return unmatched

    def export_lines(self) -> list[str]:
        """Line-delimited structured records for transcripts and the gateway."""
        return [json.dumps(r.to_dict(), sort_keys=True) for r in self.records()]
