"""Command line entry point.

``careflow run`` loads the guideline corpus, abstraction rules, and the
interaction knowledge base, replays a scenario into an output directory
(trace files, report.json, summary.txt, figures/), and optionally keeps
serving the HTTP API afterwards for interactive use.

Exit codes: 0 all expectations pass, 1 expectation failure,
2 configuration or parse error.

``careflow validate`` checks guideline files and prints their issues.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..model import errors_of, load_guideline_file, validate_guideline
from .environment import Environment, EnvironmentConfig
from .scenario import ScenarioError, load_scenario, run_scenario

logger = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="careflow",
        description="Guideline enactment environment: scenario runner and HTTP gateway",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and/or serve the HTTP API")
    run.add_argument("--cigs", required=True, type=Path,
                     help="guideline corpus directory (with pdss/ and vc/ subdirectories)")
    run.add_argument("--master", type=Path, help="master dispatch guideline file")
    run.add_argument("--kdom-rules", type=Path, help="abstraction rule file or directory")
    run.add_argument("--interaction-kb", type=Path, help="interaction knowledge base CSV")
    run.add_argument("--scenario", type=Path, help="scenario script to replay")
    run.add_argument("--out", required=True, type=Path, help="report output directory")
    run.add_argument("--serve", metavar="ADDR",
                     help="serve the HTTP API on host:port after the scenario")
    run.add_argument("--log-level", default="warning",
                     choices=["debug", "info", "warning", "error"])
    run.add_argument("--routing", type=Path, help="routing-rule table (JSON)")
    run.add_argument("--external-data", type=Path, help="external source stub data (JSON)")
    run.add_argument("--static", type=Path, help="dashboard static files to serve at /")
    run.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    run.add_argument("--restart-between-events", action="store_true",
                     help="rebuild every component from the journal after each event")
    run.add_argument("--workers", type=int, default=1,
                     help="worker threads for same-time events of different patients")
    run.add_argument("--fsync", action="store_true", help="fsync the journal on append")

    check = sub.add_parser("validate", help="validate guideline files")
    check.add_argument("files", nargs="+", type=Path)
    return parser


def _cmd_validate(args) -> int:
    worst = 0
    for path in args.files:
        try:
            definition = load_guideline_file(path)
        except Exception as exc:
            print(f"{path}: parse error: {exc}")
            worst = 2
            continue
        issues = validate_guideline(definition)
        if not issues:
            print(f"{path}: ok ({definition.id}, {len(definition.tasks)} tasks)")
            continue
        for issue in issues:
            print(f"{path}: {issue.severity}: {issue.location}: {issue.message}")
        if errors_of(issues):
            worst = max(worst, 2)
    return worst


def _cmd_run(args) -> int:
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.scenario is None and args.serve is None:
        print("error: nothing to do; pass --scenario and/or --serve", file=sys.stderr)
        return 2

    config = EnvironmentConfig(
        cigs_dir=args.cigs,
        master_path=args.master,
        kdom_rules_path=args.kdom_rules,
        interaction_kb_path=args.interaction_kb,
        routing_path=args.routing,
        external_data_path=args.external_data,
        journal_path=args.out / "journal.ndjson",
        fsync=args.fsync,
    )

    exit_code = 0
    if args.scenario is not None:
        try:
            script = load_scenario(args.scenario)
            result = run_scenario(
                config,
                script,
                args.out,
                figures=not args.no_figures,
                restart_between_events=args.restart_between_events,
                workers=args.workers,
            )
        except (ScenarioError, OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        for entry in result.expectations:
            status = "PASS" if entry["passed"] else "FAIL"
            print(f"[{status}] {entry['expectation']} -- {entry['detail']}")
        print(f"report written to {args.out}")
        exit_code = 0 if result.passed else 1

    if args.serve is not None:
        import uvicorn

        from .app import create_app

        host, _, port = args.serve.rpartition(":")
        env = Environment(config)
        app = create_app(env, static_dir=args.static)
        try:
            uvicorn.run(app, host=host or "127.0.0.1", port=int(port or "8000"))
        finally:
            env.close()
    return exit_code


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "validate":
        return _cmd_validate(args)
    return _cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
