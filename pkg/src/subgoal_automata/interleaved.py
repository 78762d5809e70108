"""Interleaved automaton induction and reinforcement learning.

Episodes run under the current automaton; whenever an episode produces an
observation the automaton misclassifies (wrong terminal recognition, or two
transitions firing at once), the episode ends, the compressed trace is added
to the task's counterexample store, and a new minimal automaton is learned
from the full store.  Learning is deferred until the first positive trace;
every re-learning resets all Q-functions.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

from .automaton import DeterminismViolation, SubgoalAutomaton
from .induction import (
    AutomatonLearningTask,
    check_consistency,
    find_minimal_automaton,
)
from .officeworld import (
    OFFICE_ALPHABET,
    OfficeEnv,
    Task,
    default_layout,
    ground_truth_automaton,
    random_grid,
)
from .qlearning import QBank, ShapingPotential, update_all
from .traces import (
    Alphabet,
    ObservationTrace,
    STATUS_ALIVE,
    STATUS_DEAD_END,
    STATUS_GOAL,
    TraceLabel,
    compress_steps,
    label_from_outcome,
)

if TYPE_CHECKING:  # pragma: no cover - import cycle guard for type hints only
    from .experiments import ExperimentConfig

DETERMINISM_VIOLATION = "determinism_violation"
RECOGNITION_MISMATCH = "recognition_mismatch"


@dataclass(frozen=True)
class Counterexample:
    kind: str
    env_status: str
    automaton_state: str


class SolverUnsatError(Exception):
    """The stored counterexamples admit no automaton in the hypothesis space."""

    def __init__(self, task: Task, examples: tuple[ObservationTrace, ...]):
        self.task = task
        self.examples = examples
        super().__init__(
            f"no automaton consistent with the {len(examples)} stored "
            f"counterexamples of task {task.value}; the labeling is contradictory "
            f"or the hypothesis space is exhausted"
        )


def is_counterexample(
    env_status: str,
    state: str,
    automaton: SubgoalAutomaton,
    det_violation: bool = False,
) -> Optional[Counterexample]:
    """Counterexample test: determinism violation, or broken recognition.

    Recognition must be a biconditional: the automaton is at uA exactly when
    the environment reached the goal, and at uR exactly on a dead end.
    """
    if det_violation:
        return Counterexample(DETERMINISM_VIOLATION, env_status, state)
    at_accept = state == automaton.accepting_state
    at_reject = state == automaton.rejecting_state
    if (env_status == STATUS_GOAL) != at_accept or (env_status == STATUS_DEAD_END) != at_reject:
        return Counterexample(RECOGNITION_MISMATCH, env_status, state)
    return None


def initial_automaton(alphabet: Alphabet) -> SubgoalAutomaton:
    """Three states, no edges: accepts and rejects nothing."""
    return SubgoalAutomaton(["u0", "uA", "uR"], alphabet)


def _mask_translation(task_alphabet: Alphabet) -> list[int]:
    """Office-alphabet observation mask -> task-alphabet mask, as a table."""
    table = []
    for office_mask in range(OFFICE_ALPHABET.full_mask + 1):
        symbols = OFFICE_ALPHABET.decode(office_mask)
        table.append(task_alphabet.encode(s for s in symbols if s in task_alphabet))
    return table


@dataclass
class RelearnEvent:
    task: str
    grid: int
    episode: int
    num_states: int
    literal_count: int
    solver_time_s: float
    nodes_explored: int
    n_pos: int
    n_neg: int
    n_inc: int


class TaskLearner:
    """Per-task automaton, counterexample store, and solver bookkeeping."""

    def __init__(
        self,
        task: Task,
        alphabet: Alphabet,
        max_states: int,
        max_edges_per_pair: int,
        node_budget: int,
        fixed_automaton: Optional[SubgoalAutomaton] = None,
    ):
        self.task = task
        self.alphabet = alphabet
        self.translate = _mask_translation(alphabet)
        self.max_states = max_states
        self.max_edges_per_pair = max_edges_per_pair
        self.node_budget = node_budget
        self.learning_enabled = fixed_automaton is None
        self.automaton = fixed_automaton or initial_automaton(alphabet)
        self.potential = ShapingPotential.from_automaton(self.automaton)
        self.example_labels: dict[tuple[int, ...], TraceLabel] = {}
        self.examples: dict[TraceLabel, list[ObservationTrace]] = {
            TraceLabel.POSITIVE: [],
            TraceLabel.NEGATIVE: [],
            TraceLabel.INCOMPLETE: [],
        }
        self.relearn_events: list[RelearnEvent] = []
        self.cum_solver_time_s = 0.0
        self.cum_nodes = 0
        self.coverage_failures: list[ObservationTrace] = []
        self.counterexample_count = 0

    def counts(self) -> tuple[int, int, int]:
        return (
            len(self.examples[TraceLabel.POSITIVE]),
            len(self.examples[TraceLabel.NEGATIVE]),
            len(self.examples[TraceLabel.INCOMPLETE]),
        )

    def all_examples(self) -> tuple[ObservationTrace, ...]:
        return (
            *self.examples[TraceLabel.POSITIVE],
            *self.examples[TraceLabel.NEGATIVE],
            *self.examples[TraceLabel.INCOMPLETE],
        )

    def on_counterexample(
        self, raw_steps: list[int], env_status: str, grid: int, episode: int
    ) -> bool:
        """Store the compressed labeled trace; re-learn once positives exist.

        Returns True when a new automaton was installed (the caller must then
        reset the Q-functions).
        """
        self.counterexample_count += 1
        steps = compress_steps(raw_steps)
        label = label_from_outcome(env_status)
        stored = self.example_labels.get(steps)
        if stored is None:
            self.example_labels[steps] = label
            self.examples[label].append(ObservationTrace(self.alphabet, steps, label))
        elif stored is label:
            # already covered once solving resumes; never store duplicates
            pass
        else:
            # same trace under two labels: keep both so the solver surfaces it
            self.examples[label].append(ObservationTrace(self.alphabet, steps, label))
        if not self.learning_enabled or not self.examples[TraceLabel.POSITIVE]:
            return False
        return self._relearn(grid, episode)

    def _relearn(self, grid: int, episode: int) -> bool:
        solve_task = AutomatonLearningTask(
            self.alphabet,
            tuple(self.examples[TraceLabel.POSITIVE]),
            tuple(self.examples[TraceLabel.NEGATIVE]),
            tuple(self.examples[TraceLabel.INCOMPLETE]),
            max_states=self.max_states,
            max_edges_per_pair=self.max_edges_per_pair,
            node_budget=self.node_budget,
        )
        outcome = find_minimal_automaton(solve_task)
        self.cum_solver_time_s += outcome.stats.wall_time_s
        self.cum_nodes += outcome.stats.nodes_explored
        if not outcome.is_solution:
            raise SolverUnsatError(self.task, self.all_examples())
        self.automaton = outcome.automaton
        self.potential = ShapingPotential.from_automaton(self.automaton)
        report = check_consistency(self.automaton, self.all_examples())
        if not report.ok:
            self.coverage_failures.append(report.failing_trace)
        n_pos, n_neg, n_inc = self.counts()
        self.relearn_events.append(RelearnEvent(
            task=self.task.value,
            grid=grid,
            episode=episode,
            num_states=outcome.stats.num_states,
            literal_count=outcome.stats.literal_count,
            solver_time_s=outcome.stats.wall_time_s,
            nodes_explored=outcome.stats.nodes_explored,
            n_pos=n_pos, n_neg=n_neg, n_inc=n_inc,
        ))
        return True


@dataclass
class EpisodeRecord:
    steps: int
    status: str
    counterexample: Optional[Counterexample] = None
    relearned: bool = False


@dataclass
class RunResult:
    setting: str
    seed: int
    tasks: tuple[str, ...]
    metrics_rows: list[dict] = field(default_factory=list)
    relearn_log: list[RelearnEvent] = field(default_factory=list)
    final_automata: dict[str, str] = field(default_factory=dict)
    final_automata_dot: dict[str, str] = field(default_factory=dict)
    example_counts: dict[str, tuple[int, int, int]] = field(default_factory=dict)
    counterexample_counts: dict[str, int] = field(default_factory=dict)
    solver_time_s: dict[str, float] = field(default_factory=dict)
    relearn_counts: dict[str, int] = field(default_factory=dict)
    coverage_failure_counts: dict[str, int] = field(default_factory=dict)
    duplicate_obs_transitions: int = 0
    skipped_nonactive_violations: int = 0
    final_greedy_success: dict[str, float] = field(default_factory=dict)


class InterleavedRun:
    """Mutable state of one (setting, seed) run over a set of grids."""

    def __init__(self, config: "ExperimentConfig"):
        config.validate()
        self.config = config
        self.setting = config.setting
        self.multitask = config.setting.startswith("M")
        self.shaping_on = config.setting.endswith("+R")
        self.tasks = tuple(config.tasks)
        self.policy_rng = random.Random(f"{config.seed}:policy")
        self.eval_rng = random.Random(f"{config.seed}:eval")
        self.env_rng = random.Random(f"{config.seed}:env") if config.exploring_starts else None
        grid_rng = random.Random(f"{config.seed}:grid-gen")
        base = config.base_layout or default_layout()
        self.grids = [random_grid(base, grid_rng) for _ in range(config.num_grids)]
        self.envs: dict[tuple[int, Task], OfficeEnv] = {}
        n_cells = base.width * base.height
        self.qbank = QBank(config.alpha, config.gamma, config.epsilon, n_cells)
        self.learners: dict[Task, TaskLearner] = {}
        for task in self.tasks:
            alphabet = config.task_alphabet(task)
            fixed = None
            if not config.learn_automata:
                fixed = ground_truth_automaton(task, alphabet)
            self.learners[task] = TaskLearner(
                task, alphabet, config.max_states, config.max_edges_per_pair,
                config.node_budget, fixed_automaton=fixed,
            )
        self.duplicate_obs_transitions = 0
        self.skipped_nonactive_violations = 0

    def env_for(self, grid_id: int, task: Task) -> OfficeEnv:
        env = self.envs.get((grid_id, task))
        if env is None:
            env = self.envs[(grid_id, task)] = OfficeEnv(self.grids[grid_id], task)
        return env

    # -- episode ------------------------------------------------------------

    def run_episode(self, task: Task, grid_id: int, episode_index: int) -> EpisodeRecord:
        config = self.config
        learner = self.learners[task]
        env = self.env_for(grid_id, task)
        qbank = self.qbank
        rng = self.policy_rng
        dedupe = config.dedupe_runtime_obs

        state = env.reset(self.env_rng)
        office_mask = env.label_masks[state.cell]
        obs = learner.translate[office_mask]
        raw_steps = [obs]

        automaton = learner.automaton
        violation = False
        try:
            u = automaton.step_index(0, obs)
        except DeterminismViolation:
            u, violation = 0, True
        ce = is_counterexample(state.status, automaton.states[u], automaton, violation)
        relearned = False
        if ce is not None:
            relearned = learner.on_counterexample(raw_steps, state.status, grid_id, episode_index)
            if relearned:
                qbank.reset((task.value,))
            automaton = learner.automaton
            try:
                u = automaton.step_index(0, obs)
            except DeterminismViolation:
                u = 0
        if state.status != STATUS_ALIVE:
            return EpisodeRecord(0, state.status, ce, relearned)

        task_value = task.value
        states = automaton.states
        steps_taken = 0
        record_ce: Optional[Counterexample] = ce
        while steps_taken < config.episode_len:
            action = qbank.select_action((task_value, grid_id, states[u]), state.cell, rng)
            next_state, _reward = env.env_step(state, action)
            office_mask = env.label_masks[next_state.cell]
            obs = learner.translate[office_mask]
            duplicate = obs == raw_steps[-1]
            raw_steps.append(obs)
            steps_taken += 1

            violation = False
            try:
                u_next = automaton.step_index(u, obs)
            except DeterminismViolation:
                u_next, violation = u, True
            if duplicate and (violation or u_next != u):
                self.duplicate_obs_transitions += 1
                if dedupe:
                    u_next, violation = u, False

            ce = is_counterexample(next_state.status, states[u_next], automaton, violation)
            if ce is not None:
                record_ce = ce
                relearned = learner.on_counterexample(
                    raw_steps, next_state.status, grid_id, episode_index
                )
                if relearned:
                    qbank.reset((task.value,))
                break

            try:
                self._update_tasks(task, grid_id, state.cell, action, next_state.cell,
                                   office_mask)
            except DeterminismViolation:
                # active-task violation at a non-current automaton state
                record_ce = Counterexample(
                    DETERMINISM_VIOLATION, next_state.status, states[u_next]
                )
                relearned = learner.on_counterexample(
                    raw_steps, next_state.status, grid_id, episode_index
                )
                if relearned:
                    qbank.reset((task.value,))
                break

            state = next_state
            u = u_next
            if state.status != STATUS_ALIVE:
                break
        return EpisodeRecord(steps_taken, next_state.status if steps_taken else state.status,
                             record_ce, relearned)

    def _update_tasks(self, active: Task, grid_id: int, cell: int, action: int,
                      next_cell: int, office_mask: int) -> None:
        for task in (self.tasks if self.multitask else (active,)):
            learner = self.learners[task]
            shaping = learner.potential if self.shaping_on else None
            obs = learner.translate[office_mask]
            if task is active:
                update_all(self.qbank, (task.value, grid_id), learner.automaton,
                           cell, action, next_cell, obs, shaping)
            else:
                try:
                    update_all(self.qbank, (task.value, grid_id), learner.automaton,
                               cell, action, next_cell, obs, shaping)
                except DeterminismViolation:
                    self.skipped_nonactive_violations += 1

    # -- evaluation -----------------------------------------------------------

    def greedy_episode(self, task: Task, grid_id: int) -> tuple[bool, int, float]:
        """One ε=0 episode without learning; returns (success, steps, return)."""
        config = self.config
        learner = self.learners[task]
        automaton = learner.automaton
        env = self.env_for(grid_id, task)
        qbank = self.qbank
        rng = self.eval_rng
        state = env.reset()
        obs = learner.translate[env.label_masks[state.cell]]
        try:
            u = automaton.step_index(0, obs)
        except DeterminismViolation:
            u = 0
        states = automaton.states
        task_value = task.value
        steps = 0
        while steps < config.episode_len and state.status == STATUS_ALIVE:
            action = qbank.select_action(
                (task_value, grid_id, states[u]), state.cell, rng, epsilon=0.0
            )
            state, _reward = env.env_step(state, action)
            steps += 1
            obs = learner.translate[env.label_masks[state.cell]]
            try:
                u = automaton.step_index(u, obs)
            except DeterminismViolation:
                pass
        success = state.status == STATUS_GOAL
        ret = config.gamma ** (steps - 1) if success else 0.0
        return success, steps, ret


def run_experiment(config: "ExperimentConfig") -> RunResult:
    """Run one seeded experiment; deterministic for a fixed config and seed.

    Episodes are scheduled round-robin over grids (and tasks in multitask
    settings); a greedy evaluation episode is recorded every
    ``config.eval_every`` training episodes per task-grid pair.
    """
    run = InterleavedRun(config)
    result = RunResult(config.setting, config.seed, tuple(t.value for t in run.tasks))
    last_relearn_seen = {(t, g): 0 for t in run.tasks for g in range(config.num_grids)}

    for round_idx in range(config.episodes_per_grid):
        episode_index = round_idx + 1
        for grid_id in range(config.num_grids):
            for task in run.tasks:
                run.run_episode(task, grid_id, episode_index)
                if episode_index % config.eval_every == 0:
                    learner = run.learners[task]
                    success, steps, ret = run.greedy_episode(task, grid_id)
                    n_pos, n_neg, n_inc = learner.counts()
                    relearns = len(learner.relearn_events)
                    key = (task, grid_id)
                    result.metrics_rows.append({
                        "episode": episode_index,
                        "task": task.value,
                        "grid": grid_id,
                        "greedy_return": ret,
                        "steps": steps,
                        "relearn_flag": int(relearns > last_relearn_seen[key]),
                        "num_automaton_states": len(learner.automaton),
                        "cum_solver_time_ms": learner.cum_solver_time_s * 1000.0,
                        "n_pos": n_pos,
                        "n_neg": n_neg,
                        "n_inc": n_inc,
                    })
                    last_relearn_seen[key] = relearns

    for task in run.tasks:
        learner = run.learners[task]
        result.relearn_log.extend(learner.relearn_events)
        result.final_automata[task.value] = learner.automaton.to_text()
        result.final_automata_dot[task.value] = learner.automaton.to_dot()
        result.example_counts[task.value] = learner.counts()
        result.counterexample_counts[task.value] = learner.counterexample_count
        result.solver_time_s[task.value] = learner.cum_solver_time_s
        result.relearn_counts[task.value] = len(learner.relearn_events)
        result.coverage_failure_counts[task.value] = len(learner.coverage_failures)
        successes = [run.greedy_episode(task, g)[0] for g in range(config.num_grids)]
        result.final_greedy_success[task.value] = sum(successes) / len(successes)
    result.duplicate_obs_transitions = run.duplicate_obs_transitions
    result.skipped_nonactive_violations = run.skipped_nonactive_violations
    return result
