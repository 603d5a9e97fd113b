"""Two-level scenario scoring: error-free executable commands, and
effectiveness against golden acceptable-command sets.

Scoring is a pure function of (transcript, golden); re-scoring never re-runs
scenarios. Headline rates use each scenario's terminal decision point;
intermediate decision points are reported separately.
"""

from __future__ import annotations

import fnmatch
import json
from dataclasses import dataclass, field
from pathlib import Path

from .agents import BackendDescriptor
from .errors import UnmatchedDecisionPoint
from .orchestrator import RunConfig, SessionTranscript, run_scenario
from .scenarios import GoldenSpec, ScenarioSpec, load_suite  # noqa: F401  (re-export)


@dataclass
class ScenarioScore:
    scenario_id: str
    category: str
    n_outputs: int
    n_executable: int
    terminal_effective: bool | None      # None = decision point unmatched
    point_results: list[dict] = field(default_factory=list)
    status: str = ""
    warnings: list[str] = field(default_factory=list)

    @property
    def executable_rate(self) -> float:
        return self.n_executable / self.n_outputs if self.n_outputs else 0.0


@dataclass
class ScoreReport:
    backend: str
    scenario_scores: list[ScenarioScore] = field(default_factory=list)

    def n_decisions(self) -> int:
        return sum(s.n_outputs for s in self.scenario_scores)

    def executable_rate(self, category: str | None = None) -> float:
        scores = self._select(category)
        outputs = sum(s.n_outputs for s in scores)
        valid = sum(s.n_executable for s in scores)
        return valid / outputs if outputs else 0.0

    def effective_rate(self, category: str | None = None) -> float:
        scores = [s for s in self._select(category)
                  if s.terminal_effective is not None]
        if not scores:
            return 0.0
        return sum(1 for s in scores if s.terminal_effective) / len(scores)

    def point_effective_rate(self, category: str | None = None) -> float:
        """Per-decision-point rate, the alternative reading of a test point."""
        points = [p for s in self._select(category) for p in s.point_results
                  if p["matched_event"]]
        if not points:
            return 0.0
        return sum(1 for p in points if p["effective"]) / len(points)

    def categories(self) -> list[str]:
        return sorted({s.category for s in self.scenario_scores})

    def _select(self, category: str | None) -> list[ScenarioScore]:
        if category is None:
            return self.scenario_scores
        return [s for s in self.scenario_scores if s.category == category]

    def to_dict(self) -> dict:
        return {
            "backend": self.backend,
            "n_scenarios": len(self.scenario_scores),
            "n_decisions": self.n_decisions(),
            "executable_rate": self.executable_rate(),
            "effective_rate": self.effective_rate(),
            "point_effective_rate": self.point_effective_rate(),
            "per_category": {
                cat: {
                    "n_scenarios": len(self._select(cat)),
                    "executable_rate": self.executable_rate(cat),
                    "effective_rate": self.effective_rate(cat),
                    "point_effective_rate": self.point_effective_rate(cat),
                } for cat in self.categories()
            },
            "scenarios": [
                {
                    "id": s.scenario_id, "category": s.category,
                    "outputs": s.n_outputs, "executable": s.n_executable,
                    "terminal_effective": s.terminal_effective,
                    "status": s.status, "warnings": s.warnings,
                } for s in self.scenario_scores
            ],
        }


def score_executable(transcript: SessionTranscript) -> float:
    """Fraction of agent outputs that parsed and validated against the registry."""
    verdicts = transcript.of_kind("verdict")
    if not verdicts:
        return 0.0
    return sum(1 for v in verdicts if v["executable"]) / len(verdicts)


def _command_matches(command: str, patterns: list[str]) -> bool:
    return any(fnmatch.fnmatchcase(command, pattern) for pattern in patterns)


def score_effectiveness(transcript: SessionTranscript, golden: GoldenSpec,
                        strict: bool = False) -> list[dict]:
    """Resolve each golden decision point against the transcript.

    A point matches when, after the last event containing its trigger text,
    an execution with status ok carries an acceptable command. Points whose
    trigger never occurred are flagged (and raise when strict).
    """
    events = transcript.of_kind("event")
    executions = [r for r in transcript.records if r["kind"] == "execution"]
    results = []
    for point in golden.decision_points:
        trigger_index = None
        trigger_at = None
        for record in events:
            if point.trigger_contains in record["text"]:
                trigger_index = record["seq"]
                trigger_at = record["at"]
        if trigger_index is None:
            if strict:
                raise UnmatchedDecisionPoint(point.trigger_contains)
            results.append({"trigger": point.trigger_contains,
                            "matched_event": False, "effective": False,
                            "optimal": False, "command": None})
            continue
        command = None
        effective = False
        optimal = False
        for record in executions:
            if record["at"] < trigger_at or record["status"] != "ok":
                continue
            if _command_matches(record["command"], point.acceptable):
                command = record["command"]
                effective = True
                optimal = _command_matches(record["command"],
                                           point.optimal or point.acceptable)
                break
        results.append({"trigger": point.trigger_contains, "matched_event": True,
                        "effective": effective, "optimal": optimal,
                        "command": command})
    return results


def score_scenario(scenario: ScenarioSpec, transcript: SessionTranscript) -> ScenarioScore:
    verdicts = transcript.of_kind("verdict")
    points = score_effectiveness(transcript, scenario.golden)
    terminal = scenario.golden.terminal_point()
    terminal_effective: bool | None = None
    warnings = []
    if terminal is not None:
        match = next((p for p in points if p["trigger"] == terminal.trigger_contains),
                     None)
        if match is None or not match["matched_event"]:
            warnings.append(f"terminal trigger never occurred: "
                            f"{terminal.trigger_contains!r}")
        else:
            terminal_effective = match["effective"]
    else:
        warnings.append("scenario has no golden decision points")
    return ScenarioScore(
        scenario_id=scenario.id,
        category=scenario.category,
        n_outputs=len(verdicts),
        n_executable=sum(1 for v in verdicts if v["executable"]),
        terminal_effective=terminal_effective,
        point_results=points,
        status=transcript.meta.get("status", ""),
        warnings=warnings,
    )


def run_suite(scenarios: list[ScenarioSpec], backend: BackendDescriptor,
              config: RunConfig | None = None,
              transcripts_dir: str | Path | None = None) -> ScoreReport:
    """Run every scenario independently and assemble a report."""
    report = ScoreReport(backend=_backend_label(backend))
    for scenario in scenarios:
        transcript = run_scenario(scenario, backend, config or RunConfig())
        if transcripts_dir:
            path = Path(transcripts_dir) / f"{scenario.id}.jsonl"
            path.parent.mkdir(parents=True, exist_ok=True)
            transcript.save(path)
        report.scenario_scores.append(score_scenario(scenario, transcript))
    return report


def _backend_label(backend: BackendDescriptor) -> str:
    if backend.kind == "rule_oracle":
        return f"rule_oracle[{backend.profile}]"
    if backend.kind == "remote_api":
        return f"remote[{backend.model}]" if backend.model else "remote"
    return backend.kind


def _pct(rate: float) -> str:
    return f"{round(rate * 100):.0f}%"


def format_report(reports: list[ScoreReport]) -> str:
    """Text table of executable/effective rates per backend and category."""
    header = (f"{'Backend':<26} {'Category':<10} {'Scen':>5} {'Decis':>6} "
              f"{'Executable':>11} {'Effective':>10}")
    lines = [header, "-" * len(header)]
    for report in reports:
        rows = [("all", None)] + [(c, c) for c in report.categories()]
        for label, category in rows:
            scores = report._select(category)
            lines.append(
                f"{report.backend:<26} {label:<10} {len(scores):>5} "
                f"{sum(s.n_outputs for s in scores):>6} "
                f"{_pct(report.executable_rate(category)):>11} "
                f"{_pct(report.effective_rate(category)):>10}")
    return "\n".join(lines)


def save_report(reports: list[ScoreReport], path: str | Path) -> None:
    payload = [r.to_dict() for r in reports]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
