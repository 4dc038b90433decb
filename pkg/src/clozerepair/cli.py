"""Command-line entry points.

    clozerepair repair --task config.json [overrides]
    clozerepair corpus gen --seed S --count C --out DIR
    clozerepair corpus eval --dir DIR [--task-template FILE] [--ablation]

Exit codes for `repair`: 0 a plausible patch was found, 10 none found,
20 configuration error (including an empty suspicious-location list),
30 predictor backend unavailable.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import (
    ablation_metrics,
    evaluate_corpus,
    format_ablation,
    format_metrics,
    generate_bug_corpus,
)
from .orchestrator import (
    STATUS_NO_LOCATIONS,
    STATUS_PLAUSIBLE_FOUND,
    ConfigError,
    RepairConfig,
    run_repair,
)
from .predictor import BackendUnavailable

EXIT_PLAUSIBLE = 0
EXIT_NO_PLAUSIBLE = 10
EXIT_CONFIG_ERROR = 20
EXIT_BACKEND_UNAVAILABLE = 30

_DURATION_UNITS = {"s": 1.0, "m": 60.0, "h": 3600.0}


def parse_duration(text):
    """'300', '45s', '5m', or '2h' -> seconds."""
    text = text.strip()
    unit = 1.0
    if text and text[-1].lower() in _DURATION_UNITS:
        unit = _DURATION_UNITS[text[-1].lower()]
        text = text[:-1]
    try:
        return float(text) * unit
    except ValueError:
        raise ConfigError(f"cannot parse duration {text!r}")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="clozerepair",
        description="Cloze-style automated program repair")
    commands = parser.add_subparsers(dest="command", required=True)

    repair = commands.add_parser("repair", help="repair one configured task")
    repair.add_argument("--task", required=True, help="JSON config file")
    repair.add_argument("--beam-width", type=int)
    repair.add_argument("--max-patches", type=int)
    repair.add_argument("--top-suspicious", type=int)
    repair.add_argument("--timeout", help="wall clock budget, e.g. 300, 5m, 2h")
    repair.add_argument("--predictor", choices=["reference", "remote"])
    repair.add_argument("--remote-endpoint")
    repair.add_argument("--validate", choices=["all", "first-plausible"])
    repair.add_argument("--strategies",
                        help="comma list of families or strategy names")
    repair.add_argument("--report-dir")

    corpus = commands.add_parser("corpus", help="synthetic bug corpus tools")
    corpus_commands = corpus.add_subparsers(dest="corpus_command", required=True)

    gen = corpus_commands.add_parser("gen", help="generate a seeded bug corpus")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument("--out", required=True)

    evaluate = corpus_commands.add_parser("eval", help="repair every corpus bug")
    evaluate.add_argument("--dir", required=True)
    evaluate.add_argument("--task-template",
                          help="JSON file of RepairConfig overrides per bug")
    evaluate.add_argument("--beam-width", type=int, default=5)
    evaluate.add_argument("--max-patches", type=int, default=100000)
    evaluate.add_argument("--strategies")
    evaluate.add_argument("--workers", type=int, default=1)
    evaluate.add_argument("--ablation", action="store_true",
                          help="cumulative strategy-set table instead of one run")
    evaluate.add_argument("--out", help="write machine-readable metrics JSON here")
    return parser


def _repair_overrides(args):
    overrides = {}
    if args.beam_width is not None:
        overrides["beam_width"] = args.beam_width
    if args.max_patches is not None:
        overrides["max_patches"] = args.max_patches
    if args.top_suspicious is not None:
        overrides["top_suspicious"] = args.top_suspicious
    if args.timeout is not None:
        overrides["wall_clock_limit"] = parse_duration(args.timeout)
    if args.predictor is not None:
        overrides["predictor_backend"] = args.predictor
    if args.remote_endpoint is not None:
        overrides["remote_endpoint"] = args.remote_endpoint
    if args.validate is not None:
        overrides["validate_mode"] = args.validate
    if args.strategies is not None:
        overrides["strategies"] = tuple(
            name.strip() for name in args.strategies.split(",") if name.strip())
    if args.report_dir is not None:
        overrides["report_dir"] = args.report_dir
    return overrides


def _cmd_repair(args):
    try:
        config = RepairConfig.from_file(args.task)
        for key, value in _repair_overrides(args).items():
            setattr(config, key, value)
        config.__post_init__()
        report = run_repair(config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except BackendUnavailable as exc:
        print(f"predictor backend unavailable: {exc}", file=sys.stderr)
        return EXIT_BACKEND_UNAVAILABLE

    for entry in report.plausible:
        print(f"plausible rank {entry['rank']}: {entry['file']}:"
              f"{entry['line_index']} [{entry['inserted']}] {entry['rendered_line']}")
    if report.status == STATUS_NO_LOCATIONS:
        print("no suspicious locations supplied", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    if report.status == STATUS_PLAUSIBLE_FOUND:
        return EXIT_PLAUSIBLE
    print("no plausible patch found", file=sys.stderr)
    return EXIT_NO_PLAUSIBLE


def _cmd_corpus_gen(args):
    out = generate_bug_corpus(args.seed, args.count, args.out)
    print(f"wrote {args.count} bugs to {out}")
    return 0


def _cmd_corpus_eval(args):
    overrides = {}
    if args.task_template:
        with open(args.task_template, encoding="utf-8") as handle:
            overrides.update(json.load(handle))
    overrides.setdefault("beam_width", args.beam_width)
    overrides.setdefault("max_patches", args.max_patches)
    overrides.setdefault("workers", args.workers)
    if args.strategies:
        overrides["strategies"] = tuple(
            name.strip() for name in args.strategies.split(",") if name.strip())
    if args.ablation:
        results = ablation_metrics(args.dir, **overrides)
        print(format_ablation(results))
    else:
        results = evaluate_corpus(args.dir, **overrides)
        print(format_metrics(results))
    if args.out:
        Path(args.out).write_text(
            json.dumps(results, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return 0


def main(argv=None):
    args = _build_parser().parse_args(argv)
    if args.command == "repair":
        return _cmd_repair(args)
    if args.command == "corpus":
        if args.corpus_command == "gen":
            return _cmd_corpus_gen(args)
        return _cmd_corpus_eval(args)
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
