"""Command-line entry points: run, induce, replay, aggregate."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .automaton import AutomatonParseError, DeterminismViolation, parse_automaton
from .experiments import (
    ExperimentConfig,
    aggregate_metrics,
    load_config,
    run_and_write,
    write_aggregate_csv,
)
from .induction import AutomatonLearningTask, find_minimal_automaton
from .officeworld import Task
from .traces import Alphabet, load_traces


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subgoal-automata",
        description="Induce subgoal automata from traces and train policies over them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one experiment run from a config file")
    run.add_argument("--config", required=True, help="INI config file ([experiment] section)")
    run.add_argument("--seed", type=int, help="override the config's seed")
    run.add_argument("--setting", choices=("S", "S+R", "M", "M+R"), help="override setting")
    run.add_argument("--scale", choices=("desk", "paper"), help="override grid/episode counts")
    run.add_argument("--out", help="override the output directory")

    induce = sub.add_parser("induce", help="learn a minimal automaton from a trace file")
    induce.add_argument("--traces", required=True, help="trace file (LABEL; {a,b}; {}; ...)")
    induce.add_argument("--alphabet", required=True, help="comma-separated observables")
    induce.add_argument("--max-states", type=int, default=10)
    induce.add_argument("--max-edges-per-pair", type=int, default=1)
    induce.add_argument("--budget", type=int, default=10**8, help="search node budget")
    induce.add_argument("--dot", help="also write the automaton in DOT format here")

    replay = sub.add_parser("replay", help="run an automaton over a trace file")
    replay.add_argument("--automaton", required=True, help="automaton text file")
    replay.add_argument("--traces", required=True, help="trace file to replay")

    agg = sub.add_parser("aggregate", help="merge run metrics CSVs into a summary")
    agg.add_argument("csvs", nargs="+", help="metrics.csv files from runs")
    agg.add_argument("--out", help="summary CSV path (default: stdout)")
    return parser


def _cmd_run(args) -> int:
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.setting is not None:
        overrides["setting"] = args.setting
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.scale == "desk":
        overrides["num_grids"] = 10
        overrides["episodes_per_grid"] = 2_000
    elif args.scale == "paper":
        overrides["num_grids"] = 100
        overrides["episodes_per_grid"] = 20_000
    config = load_config(args.config, **overrides)
    result = run_and_write(config)
    for task in result.tasks:
        n_pos, n_neg, n_inc = result.example_counts[task]
        print(
            f"{task}: relearned {result.relearn_counts[task]} times, "
            f"examples +{n_pos} -{n_neg} I{n_inc}, "
            f"solver {result.solver_time_s[task] * 1000.0:.1f} ms, "
            f"final greedy success {result.final_greedy_success[task]:.2f}"
        )
    if config.output_dir:
        print(f"outputs written under {config.output_dir}")
    return 0


def _cmd_induce(args) -> int:
    alphabet = Alphabet(s.strip() for s in args.alphabet.split(",") if s.strip())
    traces = load_traces(args.traces, alphabet)
    task = AutomatonLearningTask.from_traces(
        alphabet,
        traces,
        max_states=args.max_states,
        max_edges_per_pair=args.max_edges_per_pair,
        node_budget=args.budget,
    )
    outcome = find_minimal_automaton(task)
    stats = outcome.stats
    if not outcome.is_solution:
        print(f"unsatisfiable with up to {args.max_states} states "
              f"({stats.nodes_explored} candidates, {stats.wall_time_s:.3f} s)",
              file=sys.stderr)
        return 1
    sys.stdout.write(outcome.automaton.to_text())
    print(f"# states: {stats.num_states}")
    print(f"# literals: {stats.literal_count}")
    print(f"# wall time: {stats.wall_time_s:.3f} s")
    print(f"# candidates explored: {stats.nodes_explored}")
    if args.dot:
        with open(args.dot, "w", encoding="utf-8") as fh:
            fh.write(outcome.automaton.to_dot())
    return 0


def _cmd_replay(args) -> int:
    with open(args.automaton, encoding="utf-8") as fh:
        automaton = parse_automaton(fh.read())
    traces = load_traces(args.traces, automaton.alphabet)
    for trace in traces:
        try:
            verdict = automaton.run(trace)
            states = " ".join(verdict.state_sequence)
            print(f"{verdict.kind.value}\t{states}\t{trace!r}")
        except DeterminismViolation as exc:
            print(f"determinism_violation\tstep {exc.step_index}\t{trace!r}")
    return 0


def _cmd_aggregate(args) -> int:
    rows = aggregate_metrics(args.csvs)
    if args.out:
        write_aggregate_csv(args.out, rows)
        print(f"wrote {len(rows)} summary rows to {args.out}")
    else:
        for row in rows:
            print(
                f"{row['setting']}\t{row['task']}\truns={row['runs']}\t"
                f"examples={row['examples_mean']:.1f} ({row['examples_se']:.1f})\t"
                f"+={row['pos_mean']:.1f} ({row['pos_se']:.1f})\t"
                f"-={row['neg_mean']:.1f} ({row['neg_se']:.1f})\t"
                f"I={row['inc_mean']:.1f} ({row['inc_se']:.1f})\t"
                f"solver_ms={row['solver_time_ms_mean']:.1f} ({row['solver_time_ms_se']:.1f})"
            )
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "induce":
            return _cmd_induce(args)
        if args.command == "replay":
            return _cmd_replay(args)
        return _cmd_aggregate(args)
    except (OSError, ValueError, AutomatonParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
