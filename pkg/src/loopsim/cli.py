"""Command-line interface.

Subcommands: run (execute an experiment over seeds), report (re-aggregate
exported trace files), preset (list or dump the built-in experiments),
validate (check a config file).  Exit codes: 0 success, 1 validation
failure, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import ValidationError
from .harness import (load_config, report_from_files, run_experiment,
                      save_config)
from .presets import PRESET_NAMES, preset

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _parse_seeds(text: str | None, default_seed: int) -> list[int]:
    if not text:
        env = os.environ.get("LOOPSIM_DEFAULT_SEED")
        return [int(env)] if env else [default_seed]
    return [int(part) for part in text.split(",") if part.strip() != ""]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loopsim",
        description="Deterministic simulator of feedback loops in an "
                    "ML-based recommendation pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment over one or more seeds")
    src = p_run.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=PRESET_NAMES)
    src.add_argument("--config", metavar="FILE")
    p_run.add_argument("--seeds", metavar="S1,S2,...",
                       help="comma-separated seed list (default: "
                            "LOOPSIM_DEFAULT_SEED or the config's seed)")
    p_run.add_argument("--out", metavar="DIR",
                       help="directory for trace exports and report.json")
    p_run.add_argument("--parallel", type=int, default=1, metavar="N")

    p_report = sub.add_parser("report", help="aggregate exported trace files")
    p_report.add_argument("--runs", required=True, metavar="DIR",
                          help="directory produced by `loopsim run --out`")
    p_report.add_argument("--out", metavar="FILE",
                          help="write the aggregate report here (default stdout)")

    p_preset = sub.add_parser("preset", help="inspect built-in experiment presets")
    preset_sub = p_preset.add_subparsers(dest="preset_command", required=True)
    p_dump = preset_sub.add_parser("dump", help="write a preset as a config file")
    p_dump.add_argument("name", choices=PRESET_NAMES)
    p_dump.add_argument("--out", metavar="FILE", help="default stdout")
    preset_sub.add_parser("list", help="list preset names")

    p_val = sub.add_parser("validate", help="validate a config file")
    p_val.add_argument("--config", required=True, metavar="FILE")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "report":
            return _cmd_report(args)
        if args.command == "preset":
            return _cmd_preset(args)
        if args.command == "validate":
            return _cmd_validate(args)
        raise AssertionError(args.command)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _cmd_run(args) -> int:
    if args.preset:
        config = preset(args.preset)
        name = args.preset
    else:
        config = load_config(args.config)
        name = None
    seeds = _parse_seeds(args.seeds, config.seed)
    result = run_experiment(name or config, seeds=seeds,
                            parallelism=args.parallel, out_dir=args.out)
    summary = {
        "preset": result.preset_name,
        "seeds": sorted(result.traces),
        "failed_seeds": result.failures,
        "bias_annotation": result.report["bias_annotation"],
    }
    print(json.dumps(summary, indent=2))
    if result.failures:
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_report(args) -> int:
    report = report_from_files(args.runs)
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_preset(args) -> int:
    if args.preset_command == "list":
        for name in PRESET_NAMES:
            print(name)
        return EXIT_OK
    config = preset(args.name)
    if args.out:
        save_config(config, args.out)
    else:
        from .harness import config_to_dict
        print(json.dumps(config_to_dict(config), indent=2))
    return EXIT_OK


def _cmd_validate(args) -> int:
    load_config(args.config)
    print("ok")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
