"""Command line front door: run scenarios, evaluate suites, replay transcripts,
serve the HTTP gateway."""

from __future__ import annotations

import argparse
import sys

from .agents import BackendDescriptor, parse_backend_arg
from .errors import TwincellError
from .evalharness import format_report, load_suite, run_suite, save_report
from .gateway import GatewayConfig, serve
from .orchestrator import RunConfig, Session, SessionTranscript
from .scenarios import resolve_scenario


def _interactive_approval(approval) -> str:
    print(f"pending approval {approval.id}: {approval.agent_id} wants "
          f"{approval.decision.command!r} ({approval.decision.reason})")
    answer = input("approve? [y/N] ").strip().lower()
    return "approved" if answer in ("y", "yes") else "rejected"


def cmd_run(args: argparse.Namespace) -> int:
    scenario = resolve_scenario(args.scenario, args.scenario_dir)
    backend = parse_backend_arg(args.backend)
    config = RunConfig(
        approval_mode=args.approve,
        inference_pause="buffer_events" if args.buffer_events else "pause_clock",
    )
    callback = _interactive_approval if args.approve == "human" else None
    session = Session(scenario, backend, config)
    transcript = session.run(approval_callback=callback)
    for line in transcript.event_lines():
        print(line)
    verdicts = transcript.of_kind("verdict")
    executable = sum(1 for v in verdicts if v["executable"])
    print(f"-- status: {session.status}; decisions: {len(verdicts)}; "
          f"executable: {executable}/{len(verdicts)}", file=sys.stderr)
    if args.transcript:
        transcript.save(args.transcript)
        print(f"-- transcript written to {args.transcript}", file=sys.stderr)
    return 0 if session.status in ("finished", "time_limit") else 1


def cmd_eval(args: argparse.Namespace) -> int:
    scenarios = load_suite(args.suite)
    backend = parse_backend_arg(args.backend)
    report = run_suite(scenarios, backend, transcripts_dir=args.transcripts)
    print(format_report([report]))
    if args.report:
        save_report([report], args.report)
        print(f"-- report written to {args.report}", file=sys.stderr)
    if report.executable_rate() < args.min_executable:
        print(f"-- executable rate {report.executable_rate():.2f} below "
              f"threshold {args.min_executable}", file=sys.stderr)
        return 1
    if report.effective_rate() < args.min_effective:
        print(f"-- effective rate {report.effective_rate():.2f} below "
              f"threshold {args.min_effective}", file=sys.stderr)
        return 1
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    recorded = SessionTranscript.load(args.transcript)
    scenario = resolve_scenario(recorded.meta["scenario"], args.scenario_dir)
    backend = BackendDescriptor(kind="scripted_replay",
                                script_path=str(args.transcript))
    session = Session(scenario, backend, RunConfig())
    replayed = session.run()
    problems = recorded.diff(replayed)
    if problems:
        print(f"replay diverged ({len(problems)} differences):")
        for problem in problems[:10]:
            print(f"  {problem}")
        return 1
    print(f"replay identical: {len(replayed.records)} records")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    config = GatewayConfig(
        scenario_dir=args.scenario_dir or "",
        backend=parse_backend_arg(args.backend),
        approval_mode=args.approve,
        pace_ms=args.pace_ms,
        console_dir=args.console_dir or "",
    )
    serve(config, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twincell",
        description="Agent-controlled production cell: run, evaluate, replay, serve.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario and print its event log")
    run_p.add_argument("scenario", help="packaged scenario name or YAML path")
    run_p.add_argument("--backend", default="rule_oracle")
    run_p.add_argument("--approve", choices=["auto", "human"], default="auto")
    run_p.add_argument("--scenario-dir", default=None)
    run_p.add_argument("--transcript", default=None, help="write JSONL transcript")
    run_p.add_argument("--buffer-events", action="store_true",
                       help="simulate inference latency instead of pausing the clock")
    run_p.set_defaults(func=cmd_run)

    eval_p = sub.add_parser("eval", help="score a scenario suite against a backend")
    eval_p.add_argument("suite", help="packaged suite name or YAML path")
    eval_p.add_argument("--backend", default="rule_oracle:fallback")
    eval_p.add_argument("--report", default=None, help="write JSON report")
    eval_p.add_argument("--transcripts", default=None,
                        help="directory for per-scenario transcripts")
    eval_p.add_argument("--min-executable", type=float, default=0.0)
    eval_p.add_argument("--min-effective", type=float, default=0.0)
    eval_p.set_defaults(func=cmd_eval)

    replay_p = sub.add_parser("replay",
                              help="re-execute a transcript and diff the records")
    replay_p.add_argument("transcript")
    replay_p.add_argument("--scenario-dir", default=None)
    replay_p.set_defaults(func=cmd_replay)

    serve_p = sub.add_parser("serve", help="start the HTTP gateway")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8000)
    serve_p.add_argument("--backend", default="rule_oracle:fallback")
    serve_p.add_argument("--approve", choices=["auto", "human"], default="auto")
    serve_p.add_argument("--scenario-dir", default=None)
    serve_p.add_argument("--pace-ms", type=int, default=0)
    serve_p.add_argument("--console-dir", default=None,
                         help="built web console to mount at /console")
    serve_p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TwincellError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
