"""Command-line entry point: scan | detect | gen-tests | run."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_config
from .errors import ScproofError
from .pipeline import cmd_detect, cmd_gen_tests, cmd_run
from .report import exit_code_for, render_json, render_text

_STAGES = {
    "detect": cmd_detect,
    "gen-tests": cmd_gen_tests,
    "run": cmd_run,
    "scan": cmd_run,  # full pipeline
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scproof",
        description="Detect Solidity contract defects and prove them with generated tests.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("scan", "full pipeline (alias of run)"),
        ("detect", "stage 1 only: pattern matching"),
        ("gen-tests", "stages 1-2: generate proof test suites"),
        ("run", "full pipeline: detect, generate, execute, interpret"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("paths", nargs="+", help="contract sources, AST snapshots, or directories")
        cmd.add_argument("--defects", help="comma-separated defect kinds to enable")
        cmd.add_argument("--backend", help="auto | forge | kontrol | mock")
        cmd.add_argument("--offline", action="store_true", default=None)
        cmd.add_argument("--out", help="write the report here instead of stdout")
        cmd.add_argument("--format", choices=("json", "text"), default="text")
        cmd.add_argument("--config", help="configuration file (flat key/value)")
        cmd.add_argument("--workdir", help="directory for generated suites, projects and logs")
        cmd.add_argument("--force", action="store_true", help="reuse a non-empty workdir")
        cmd.add_argument(
            "--no-compile-check",
            action="store_true",
            default=None,
            help="skip compile validation of generated suites (structural checks only)",
        )
        cmd.add_argument("--template-dir", help="override the packaged template registry")
        cmd.add_argument(
            "--llm-mode", choices=("live", "offline_stub", "disabled"), default=None
        )
        cmd.add_argument("--stub-dir", help="canned LLM replies for offline_stub mode")
        cmd.add_argument("--mock-script", help="JSON outcome script for the mock backend")
        cmd.add_argument("--allow-local-tools", action="store_true", default=None)
        cmd.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def _check_workdir(workdir: str, force: bool) -> None:
    from .errors import LayoutConflict

    path = Path(workdir)
    if path.exists() and any(path.iterdir()) and not force:
        raise LayoutConflict(f"workdir not empty: {workdir} (pass --force to reuse)")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose >= 2 else logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    overrides = {
        "defects": args.defects,
        "backend": args.backend,
        "offline": args.offline,
        "workdir": args.workdir,
        "no_compile_check": args.no_compile_check,
        "template_dir": args.template_dir,
        "llm_mode": args.llm_mode,
        "stub_dir": args.stub_dir,
        "mock_script": args.mock_script,
        "allow_local_tools": args.allow_local_tools,
    }
    try:
        config = load_config(args.config, overrides)
        if args.verbose >= 1:
            for key, value in sorted(config.to_dict().items()):
                print(f"# config {key} = {value}", file=sys.stderr)
        if args.command != "detect":
            _check_workdir(config.workdir, args.force)
        report = _STAGES[args.command](args.paths, config)
    except ScproofError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3

    if args.format == "json":
        payload = render_json(report)
        if args.out:
            Path(args.out).write_bytes(payload)
        else:
            sys.stdout.buffer.write(payload)
    else:
        text = render_text(report, verbosity=args.verbose)
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    return exit_code_for(report)


if __name__ == "__main__":
    sys.exit(main())
