"""Experiment configuration, orchestration, metrics files, and aggregation.

Settings follow the single/multitask × reward-shaping grid: S, S+R, M, M+R.
One pseudorandom stream per run seed is split into named substreams (policy,
eval, grid-gen) so adding a consumer does not perturb the others.  Paper-scale
defaults (100 grids, 20,000 episodes per grid) are expensive; the desk scale
used by the test suite runs 10 grids at 2,000 episodes per grid.
"""

from __future__ import annotations

import configparser
import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

from .interleaved import RunResult, run_experiment
from .officeworld import GridLayout, OBSERVABLES, OFFICE_ALPHABET, Task
from .traces import Alphabet

SETTINGS = ("S", "S+R", "M", "M+R")

METRICS_COLUMNS = (
    "episode", "task", "grid", "greedy_return", "steps", "relearn_flag",
    "num_automaton_states", "cum_solver_time_ms", "n_pos", "n_neg", "n_inc",
)

RELEARN_COLUMNS = (
    "task", "grid", "episode", "num_states", "literal_count",
    "solver_time_s", "nodes_explored", "n_pos", "n_neg", "n_inc",
)


@dataclass
class ExperimentConfig:
    """All knobs of one run; defaults follow the experimental protocol."""

    setting: str = "S"
    tasks: tuple[Task, ...] = (Task.COFFEE,)
    num_grids: int = 100
    episodes_per_grid: int = 20_000
    episode_len: int = 100
    alpha: float = 0.1
    epsilon: float = 0.1
    gamma: float = 0.99
    max_states: int = 10
    max_edges_per_pair: int = 1
    node_budget: int = 10**8
    seed: int = 0
    eval_every: int = 100
    restricted_alphabet: bool = False
    alphabet_override: Optional[tuple[str, ...]] = None
    learn_automata: bool = True
    exploring_starts: bool = True
    dedupe_runtime_obs: bool = False
    base_layout: Optional[GridLayout] = None
    output_dir: Optional[str] = None

    @classmethod
    def desk(cls, **overrides) -> "ExperimentConfig":
        """CI-scale profile: 10 grids, 2,000 episodes per grid."""
        overrides.setdefault("num_grids", 10)
        overrides.setdefault("episodes_per_grid", 2_000)
        return cls(**overrides)

    def validate(self) -> None:
        if self.setting not in SETTINGS:
            raise ValueError(f"setting must be one of {SETTINGS}, got {self.setting!r}")
        if not self.tasks:
            raise ValueError("at least one task is required")
        if self.setting.startswith("S") and len(self.tasks) != 1:
            raise ValueError("single-task settings take exactly one task")
        for value, name in ((self.num_grids, "num_grids"),
                            (self.episodes_per_grid, "episodes_per_grid"),
                            (self.episode_len, "episode_len"),
                            (self.eval_every, "eval_every"),
                            (self.max_states, "max_states")):
            if value < 1:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.alphabet_override is not None:
            for symbol in self.alphabet_override:
                if symbol not in OFFICE_ALPHABET:
                    raise ValueError(f"unknown observable {symbol!r} in alphabet override")
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")

    def task_alphabet(self, task: Task) -> Alphabet:
        """The observable alphabet the run exposes to this task's learner."""
        if self.alphabet_override is not None:
            return Alphabet(self.alphabet_override)
        if self.restricted_alphabet:
            return Alphabet(task.restricted_alphabet)
        return Alphabet(OBSERVABLES)

    def run_name(self) -> str:
        tasks = "-".join(t.value for t in self.tasks)
        alpha = "restricted" if self.restricted_alphabet else "full"
        return f"{self.setting.replace('+', '')}_{tasks}_{alpha}_seed{self.seed}"


# --- config file ------------------------------------------------------------


def load_config(path: str, **overrides) -> ExperimentConfig:
    """Read an INI config file ([experiment] section) with keyword overrides."""
    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    if not parser.has_section("experiment"):
        raise ValueError(f"{path}: missing [experiment] section")
    section = parser["experiment"]
    kwargs: dict = {}
    if "setting" in section:
        kwargs["setting"] = section.get("setting").strip()
    if "tasks" in section:
        kwargs["tasks"] = tuple(
            Task(name.strip()) for name in section.get("tasks").split(",") if name.strip()
        )
    for key in ("num_grids", "episodes_per_grid", "episode_len", "max_states",
                "max_edges_per_pair", "seed", "eval_every"):
        if key in section:
            kwargs[key] = section.getint(key)
    if "node_budget" in section:
        kwargs["node_budget"] = int(float(section.get("node_budget")))
    for key in ("alpha", "epsilon", "gamma"):
        if key in section:
            kwargs[key] = section.getfloat(key)
    for key in ("restricted_alphabet", "learn_automata", "exploring_starts",
                "dedupe_runtime_obs"):
        if key in section:
            kwargs[key] = section.getboolean(key)
    if "alphabet" in section:
        kwargs["alphabet_override"] = tuple(
            s.strip() for s in section.get("alphabet").split(",") if s.strip()
        )
    if "output_dir" in section:
        kwargs["output_dir"] = section.get("output_dir").strip()
    if section.get("scale", "").strip() == "desk":
        kwargs.setdefault("num_grids", 10)
        kwargs.setdefault("episodes_per_grid", 2_000)
    kwargs.update(overrides)
    config = ExperimentConfig(**kwargs)
    config.validate()
    return config


# --- running and writing -----------------------------------------------------


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_metrics_csv(path: str, rows: Iterable[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        for row in rows:
            writer.writerow([_format_value(row[c]) for c in METRICS_COLUMNS])


def write_relearn_log(path: str, result: RunResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RELEARN_COLUMNS)
        for event in result.relearn_log:
            writer.writerow([_format_value(getattr(event, c)) for c in RELEARN_COLUMNS])


def write_run_outputs(result: RunResult, out_dir: str, name: Optional[str] = None) -> str:
    """Write metrics CSV, relearn log, and final automata (text + DOT)."""
    prefix = name or f"{result.setting.replace('+', '')}_seed{result.seed}"
    run_dir = os.path.join(out_dir, prefix)
    os.makedirs(run_dir, exist_ok=True)
    write_metrics_csv(os.path.join(run_dir, "metrics.csv"), result.metrics_rows)
    write_relearn_log(os.path.join(run_dir, "relearn_log.csv"), result)
    for task, text in result.final_automata.items():
        with open(os.path.join(run_dir, f"automaton_{task}.txt"), "w", encoding="utf-8") as fh:
            fh.write(text)
        with open(os.path.join(run_dir, f"automaton_{task}.dot"), "w", encoding="utf-8") as fh:
            fh.write(result.final_automata_dot[task])
    return run_dir


def run_and_write(config: ExperimentConfig) -> RunResult:
    result = run_experiment(config)
    if config.output_dir:
        write_run_outputs(result, config.output_dir, config.run_name())
    return result


def run_many(configs: Sequence[ExperimentConfig], processes: int = 1) -> list[RunResult]:
    """Execute runs, optionally in a worker pool; order follows the input."""
    if processes <= 1 or len(configs) <= 1:
        return [run_and_write(c) for c in configs]
    with ProcessPoolExecutor(max_workers=processes) as pool:
        return list(pool.map(run_and_write, configs))


# --- aggregation --------------------------------------------------------------


def _mean_stderr(values: Sequence[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


AGGREGATE_COLUMNS = (
    "setting", "task", "runs",
    "examples_mean", "examples_se",
    "pos_mean", "pos_se", "neg_mean", "neg_se", "inc_mean", "inc_se",
    "solver_time_ms_mean", "solver_time_ms_se",
    "final_return_mean", "final_return_se",
)


def read_metrics_csv(path: str) -> list[dict]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            parsed = dict(row)
            for key in ("episode", "grid", "steps", "relearn_flag",
                        "num_automaton_states", "n_pos", "n_neg", "n_inc"):
                parsed[key] = int(row[key])
            for key in ("greedy_return", "cum_solver_time_ms"):
                parsed[key] = float(row[key])
            rows.append(parsed)
    return rows


def aggregate_metrics(paths: Sequence[str], settings: Optional[dict[str, str]] = None) -> list[dict]:
    """Merge per-run metrics CSVs into per-(setting, task) mean (stderr) rows.

    The setting of each file is taken from ``settings`` (path -> setting) or
    from the run directory name; aggregation is permutation-invariant over
    the input files.
    """
    per_key: dict[tuple[str, str], list[dict]] = {}
    for path in sorted(paths):
        rows = read_metrics_csv(path)
        if not rows:
            continue
        if settings and path in settings:
            setting = settings[path]
        else:
            setting = os.path.basename(os.path.dirname(path)).split("_")[0] or "?"
        by_task: dict[str, list[dict]] = {}
        for row in rows:
            by_task.setdefault(row["task"], []).append(row)
        for task, task_rows in by_task.items():
            last_episode = max(r["episode"] for r in task_rows)
            final_rows = [r for r in task_rows if r["episode"] == last_episode]
            final = max(final_rows, key=lambda r: r["grid"])
            per_key.setdefault((setting, task), []).append({
                "examples": final["n_pos"] + final["n_neg"] + final["n_inc"],
                "pos": final["n_pos"],
                "neg": final["n_neg"],
                "inc": final["n_inc"],
                "solver_time_ms": final["cum_solver_time_ms"],
                "final_return": sum(r["greedy_return"] for r in final_rows) / len(final_rows),
            })
    out = []
    for (setting, task), runs in sorted(per_key.items()):
        row: dict = {"setting": setting, "task": task, "runs": len(runs)}
        for column, key in (
            ("examples", "examples"), ("pos", "pos"), ("neg", "neg"), ("inc", "inc"),
            ("solver_time_ms", "solver_time_ms"), ("final_return", "final_return"),
        ):
            mean, se = _mean_stderr([r[key] for r in runs])
            row[f"{column}_mean"] = mean
            row[f"{column}_se"] = se
        out.append(row)
    return out


def write_aggregate_csv(path: str, rows: Sequence[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(AGGREGATE_COLUMNS)
        for row in rows:
            writer.writerow([
                row["setting"], row["task"], row["runs"],
                *(
                    _format_value(row[c])
                    for c in AGGREGATE_COLUMNS[3:]
                ),
            ])


def learning_curve(rows: Sequence[dict], task: str) -> list[tuple[int, float]]:
    """Greedy return averaged over grids per evaluation episode."""
    by_episode: dict[int, list[float]] = {}
    for row in rows:
        if row["task"] == task:
            by_episode.setdefault(row["episode"], []).append(row["greedy_return"])
    return [(e, sum(v) / len(v)) for e, v in sorted(by_episode.items())]


def curve_auc(curve: Sequence[tuple[int, float]]) -> float:
    """Mean greedy return across evaluation points (episode-axis area)."""
    if not curve:
        return 0.0
    return sum(v for _, v in curve) / len(curve)


# --- reduced-alphabet comparison ----------------------------------------------


def reduced_alphabet_comparison(
    base_config: ExperimentConfig, seeds: Sequence[int], processes: int = 1
) -> dict:
    """Setting S with the full vs the task-restricted alphabet, same seeds.

    Reports mean cumulative solver time and mean example counts per variant
    plus their relative change; directional reproduction of the claim that
    fewer observables make automaton learning faster with fewer examples.
    """
    if len(base_config.tasks) != 1:
        raise ValueError("reduced-alphabet comparison is single-task")
    task = base_config.tasks[0]
    report: dict = {"task": task.value, "seeds": list(seeds)}
    for variant, restricted in (("full", False), ("restricted", True)):
        configs = [
            replace(base_config, setting="S", restricted_alphabet=restricted, seed=s)
            for s in seeds
        ]
        results = run_many(configs, processes=processes)
        solver_ms = [r.solver_time_s[task.value] * 1000.0 for r in results]
        counts = [r.example_counts[task.value] for r in results]
        report[variant] = {
            "solver_time_ms_mean": sum(solver_ms) / len(solver_ms),
            "pos_mean": sum(c[0] for c in counts) / len(counts),
            "neg_mean": sum(c[1] for c in counts) / len(counts),
            "inc_mean": sum(c[2] for c in counts) / len(counts),
            "examples_mean": sum(sum(c) for c in counts) / len(counts),
        }
    full, restricted = report["full"], report["restricted"]
    report["solver_time_change"] = (
        (restricted["solver_time_ms_mean"] - full["solver_time_ms_mean"])
        / full["solver_time_ms_mean"] if full["solver_time_ms_mean"] else 0.0
    )
    report["examples_change"] = (
        (restricted["examples_mean"] - full["examples_mean"]) / full["examples_mean"]
        if full["examples_mean"] else 0.0
    )
    return report
