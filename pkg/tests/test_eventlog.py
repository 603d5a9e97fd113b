from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twincell.errors import TimeRegression
from twincell.eventlog import EventLog, Subscription, format_timestamp
from twincell.twin import EventDraft


def _draft(at: int, text: str, tags=("conveyor1",), source="test") -> EventDraft:
    return EventDraft(at, text, list(tags), source)


class TestAppend:
    def test_fourteen_seconds(self):
        log = EventLog()
        record = log.append(_draft(14_000, "hello"))
        assert record.timestamp_text == "[00:00:14]"
        assert record.seq == 1

    def test_hour_rollover(self):
        log = EventLog()
        assert log.append(_draft(3_600_000, "x")).timestamp_text == "[01:00:00]"

    def test_equal_times_keep_seq_order(self):
        log = EventLog()
        first = log.append(_draft(19_000, "a"))
        second = log.append(_draft(19_000, "b"))
        assert (first.seq, second.seq) == (1, 2)

    def test_time_regression_rejected(self):
        log = EventLog()
        log.append(_draft(1000, "a"))
        with pytest.raises(TimeRegression):
            log.append(_draft(900, "b"))

    def test_multiline_text_rejected(self):
        with pytest.raises(ValueError):
            EventLog().append(_draft(0, "two\nlines"))


class TestExcerpt:
    def test_empty_log(self):
        assert EventLog().excerpt(Subscription("a")) == ""

    def test_oldest_first_with_window(self):
        log = EventLog()
        for i in range(5):
            log.append(_draft(i * 1000, f"event {i}"))
        text = log.excerpt(Subscription("a", window=3))
        assert text.splitlines() == [
            "[00:00:02] event 2", "[00:00:03] event 3", "[00:00:04] event 4"]

    def test_disjoint_tags_give_empty(self):
        log = EventLog()
        log.append(_draft(0, "conveyor event", tags=("conveyor1",)))
        assert log.excerpt(Subscription("a", include_tags=["agv"])) == ""

    def test_empty_include_tags_means_all(self):
        log = EventLog()
        log.append(_draft(0, "anything", tags=("whatever",)))
        assert log.excerpt(Subscription("a")) == "[00:00:00] anything"

    def test_excerpt_is_pure(self):
        log = EventLog()
        log.append(_draft(0, "x"))
        sub = Subscription("a")
        assert log.excerpt(sub) == log.excerpt(sub)


class TestStatePairCheck:
    def test_paired_hold_release(self):
        log = EventLog()
        log.append(_draft(0, "the material holder holds the workpiece"))
        log.append(_draft(5000, "the material holder releases the workpiece"))
        assert log.state_pair_check("holds the workpiece",
                                    "releases the workpiece") == []

    def test_unmatched_open_returned(self):
        log = EventLog()
        record = log.append(_draft(0, "the material holder holds the workpiece"))
        unmatched = log.state_pair_check("holds the workpiece",
                                         "releases the workpiece")
        assert unmatched == [record]

    def test_empty_log(self):
        assert EventLog().state_pair_check("a", "b") == []


class TestExportAndReads:
    def test_export_lines_round_trip(self):
        log = EventLog()
        log.append(_draft(100, "x", tags=("t",), source="s"))
        parsed = json.loads(log.export_lines()[0])
        assert parsed == {"seq": 1, "at": 100, "source": "s", "tags": ["t"],
                          "text": "x"}

    def test_incremental_reads_partition(self):
        log = EventLog()
        for i in range(10):
            log.append(_draft(i, f"e{i}"))
        first = log.records(0)[:4]
        rest = log.records(first[-1].seq)
        seqs = [r.seq for r in first + rest]
        assert seqs == list(range(1, 11))


@settings(max_examples=100, deadline=None)
@given(at=st.integers(0, 99 * 3600 * 1000))
def test_timestamp_matches_floor_seconds(at):
    text = format_timestamp(at)
    hours, minutes, seconds = (int(p) for p in text.strip("[]").split(":"))
    assert hours * 3600 + minutes * 60 + seconds == at // 1000


@settings(max_examples=50, deadline=None)
@given(ats=st.lists(st.integers(0, 10_000), min_size=1, max_size=30))
def test_append_only_monotone(ats):
    log = EventLog()
    ats = sorted(ats)
    for i, at in enumerate(ats):
        log.append(_draft(at, f"e{i}"))
    records = log.records()
    assert [r.seq for r in records] == list(range(1, len(ats) + 1))
    assert all(a.at <= b.at for a, b in zip(records, records[1:]))
