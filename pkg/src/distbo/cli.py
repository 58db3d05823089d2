"""Command-line entry points: run, bench, plot, list-objectives, list-methods."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .experiment import (
    METHODS,
    PRESETS,
    ExperimentConfig,
    aggregate,
    emit_csv,
    emit_plot,
    preset_config,
    read_summary_csv,
    run_experiment,
)
from .objectives import list_objectives


def _write_outputs(traces, out_dir: Path, stem: str, t_interval: bool = False) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    traces_path = out_dir / f"{stem}_traces.csv"
    summary_path = out_dir / f"{stem}_summary.csv"
    plot_path = out_dir / f"{stem}_regret.svg"
    emit_csv(traces, traces_path)
    summary = aggregate(traces, t_interval=t_interval)
    emit_csv(summary, summary_path)
    emit_plot(summary, plot_path)
    for note in summary.notes:
        print(f"note: {note}")
    print(f"wrote {traces_path}")
    print(f"wrote {summary_path}")
    print(f"wrote {plot_path}")


def _cmd_run(args) -> int:
    config = ExperimentConfig.from_json_file(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.output_dir is not None:
        config = replace(config, output_dir=args.output_dir)
    result = run_experiment(config)
    if result.failures:
        for trial, err in result.failures:
            print(f"warning: trial {trial} failed: {err}", file=sys.stderr)
        print(f"warning: {len(result.failures)} failed trial(s) skipped", file=sys.stderr)
    if not result.traces:
        print("error: every trial failed", file=sys.stderr)
        return 1
    _write_outputs(result.traces, Path(config.output_dir), config.label, args.t_interval)
    return 0


def _cmd_bench(args) -> int:
    methods = args.methods.split(",") if args.methods else list(METHODS)
    all_traces = []
    for method in methods:
        config = preset_config(args.name, method.strip(), seed=args.seed)
        if args.trials is not None:
            config = replace(config, trials=args.trials)
        if args.budget is not None:
            config = replace(config, budget=args.budget)
        print(f"running {args.name} / {config.label} "
              f"({config.trials} trials, {config.budget} evaluations post-init)")
        result = run_experiment(config)
        for trial, err in result.failures:
            print(f"warning: {method} trial {trial} failed: {err}", file=sys.stderr)
        all_traces.extend(result.traces)
    if not all_traces:
        print("error: no successful trials", file=sys.stderr)
        return 1
    out_dir = Path(args.output_dir or "results")
    _write_outputs(all_traces, out_dir, args.name)
    return 0


def _cmd_plot(args) -> int:
    summary = read_summary_csv(args.summary)
    emit_plot(summary, args.output)
    print(f"wrote {args.output}")
    return 0


def _cmd_list_objectives(_args) -> int:
    for name in list_objectives():
        print(name)
    return 0


def _cmd_list_methods(_args) -> int:
    for name in METHODS:
        print(name)
    print("(custom fleets: use a config file with a 'fleet' list)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distbo",
        description="Distributed Bayesian optimization experiments on a simulated broadcast network",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a JSON config file")
    p_run.add_argument("config", help="path to config JSON")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--output-dir", default=None, help="override the config output_dir")
    p_run.add_argument("--t-interval", action="store_true",
                       help="use the Student-t CI multiplier instead of 1.96")
    p_run.set_defaults(fn=_cmd_run)

    p_bench = sub.add_parser("bench", help="run a named preset over the method bundle")
    p_bench.add_argument("name", choices=sorted(PRESETS))
    p_bench.add_argument("--methods", default=None,
                         help=f"comma-separated subset of {','.join(METHODS)}")
    p_bench.add_argument("--trials", type=int, default=None)
    p_bench.add_argument("--budget", type=int, default=None)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--output-dir", default=None)
    p_bench.set_defaults(fn=_cmd_bench)

    p_plot = sub.add_parser("plot", help="render a summary CSV as an SVG regret plot")
    p_plot.add_argument("summary", help="path to a summary CSV")
    p_plot.add_argument("-o", "--output", default="regret.svg")
    p_plot.set_defaults(fn=_cmd_plot)

    sub.add_parser("list-objectives", help="print registered objectives").set_defaults(
        fn=_cmd_list_objectives
    )
    sub.add_parser("list-methods", help="print available methods").set_defaults(
        fn=_cmd_list_methods
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
