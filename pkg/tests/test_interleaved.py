import pytest

from subgoal_automata.automaton import VerdictKind
from subgoal_automata.experiments import ExperimentConfig
from subgoal_automata.induction import check_consistency
from subgoal_automata.interleaved import (
    DETERMINISM_VIOLATION,
    RECOGNITION_MISMATCH,
    InterleavedRun,
    SolverUnsatError,
    TaskLearner,
    initial_automaton,
    is_counterexample,
    run_experiment,
)
from subgoal_automata.officeworld import OFFICE_ALPHABET, Task, coffee_automaton
from subgoal_automata.traces import (
    Alphabet,
    ObservationTrace,
    STATUS_ALIVE,
    STATUS_DEAD_END,
    STATUS_GOAL,
    TraceLabel,
)

COFFEE = coffee_automaton()


def desk_config(**kw):
    kw.setdefault("setting", "S")
    kw.setdefault("tasks", (Task.COFFEE,))
    kw.setdefault("seed", 0)
    kw.setdefault("num_grids", 2)
    kw.setdefault("episodes_per_grid", 200)
    kw.setdefault("restricted_alphabet", True)
    return ExperimentConfig(**kw)


class TestIsCounterexample:
    def test_goal_without_accept_state(self):
        ce = is_counterexample(STATUS_GOAL, "u1", COFFEE)
        assert ce is not None and ce.kind == RECOGNITION_MISMATCH

    def test_consistent_incomplete(self):
        assert is_counterexample(STATUS_ALIVE, "u1", COFFEE) is None

    def test_accept_while_alive_is_mismatch(self):
        ce = is_counterexample(STATUS_ALIVE, "uA", COFFEE)
        assert ce is not None and ce.kind == RECOGNITION_MISMATCH

    def test_dead_end_biconditional(self):
        assert is_counterexample(STATUS_DEAD_END, "uR", COFFEE) is None
        ce = is_counterexample(STATUS_DEAD_END, "u0", COFFEE)
        assert ce is not None and ce.kind == RECOGNITION_MISMATCH

    def test_determinism_violation_wins(self):
        ce = is_counterexample(STATUS_ALIVE, "u0", COFFEE, det_violation=True)
        assert ce is not None and ce.kind == DETERMINISM_VIOLATION

    def test_goal_recognized(self):
        assert is_counterexample(STATUS_GOAL, "uA", COFFEE) is None


class TestTaskLearner:
    def make(self, **kw):
        alpha = Alphabet(Task.COFFEE.restricted_alphabet)
        kw.setdefault("max_states", 6)
        kw.setdefault("max_edges_per_pair", 1)
        kw.setdefault("node_budget", 10**7)
        return TaskLearner(Task.COFFEE, alpha, **kw)

    def test_initial_automaton_recognizes_nothing(self):
        learner = self.make()
        auto = learner.automaton
        assert len(auto) == 3 and not auto.edges
        trace = ObservationTrace.from_sets(learner.alphabet, [{"coffee"}, {"office"}], "I")
        assert auto.run(trace).kind is VerdictKind.NEITHER

    def test_learning_deferred_until_first_positive(self):
        learner = self.make()
        deco = learner.alphabet.encode({"deco"})
        assert not learner.on_counterexample([0, deco], STATUS_DEAD_END, 0, 1)
        assert learner.counts() == (0, 1, 0)
        assert len(learner.automaton) == 3  # still the edge-free initial automaton

    def test_first_positive_triggers_learning(self):
        learner = self.make()
        coffee = learner.alphabet.encode({"coffee"})
        office = learner.alphabet.encode({"office"})
        relearned = learner.on_counterexample([0, coffee, 0, office], STATUS_GOAL, 0, 2)
        assert relearned
        assert learner.counts() == (1, 0, 0)
        assert check_consistency(learner.automaton, learner.all_examples()).ok

    def test_duplicate_counterexample_not_stored_twice(self):
        learner = self.make()
        deco = learner.alphabet.encode({"deco"})
        learner.on_counterexample([0, deco], STATUS_DEAD_END, 0, 1)
        learner.on_counterexample([0, deco], STATUS_DEAD_END, 0, 2)
        assert learner.counts() == (0, 1, 0)
        assert learner.counterexample_count == 2

    def test_traces_stored_compressed(self):
        learner = self.make()
        deco = learner.alphabet.encode({"deco"})
        learner.on_counterexample([0, 0, 0, deco], STATUS_DEAD_END, 0, 1)
        (stored,) = learner.examples[TraceLabel.NEGATIVE]
        assert stored.steps == (0, deco)

    def test_label_flip_raises_solver_unsat(self):
        learner = self.make()
        coffee = learner.alphabet.encode({"coffee"})
        learner.on_counterexample([coffee], STATUS_GOAL, 0, 1)
        with pytest.raises(SolverUnsatError):
            learner.on_counterexample([coffee], STATUS_DEAD_END, 0, 2)

    def test_relearn_covers_all_stored_counterexamples(self):
        learner = self.make()
        enc = learner.alphabet.encode
        learner.on_counterexample([0, enc({"deco"})], STATUS_DEAD_END, 0, 1)
        learner.on_counterexample([0, enc({"coffee"}), 0, enc({"office"})], STATUS_GOAL, 0, 2)
        learner.on_counterexample([0, enc({"office"}), 0, enc({"deco"})], STATUS_DEAD_END, 0, 3)
        assert not learner.coverage_failures
        report = check_consistency(learner.automaton, learner.all_examples())
        assert report.ok


class TestRunEpisode:
    def test_first_goal_episode_is_counterexample(self):
        run = InterleavedRun(desk_config())
        goals = 0
        for ep in range(1, 400):
            rec = run.run_episode(Task.COFFEE, 0, ep)
            if rec.status == STATUS_GOAL:
                goals += 1
                if goals == 1:
                    assert rec.counterexample is not None
                    assert rec.counterexample.kind == RECOGNITION_MISMATCH
                    assert rec.relearned
                    assert run.learners[Task.COFFEE].counts()[0] == 1
                    break
        assert goals == 1

    def test_recognized_dead_end_is_not_counterexample(self):
        # once the example store stops growing, dead ends are classified
        # correctly and no longer interrupt episodes
        run = InterleavedRun(desk_config(seed=2))
        learner = run.learners[Task.COFFEE]
        last_change = 0
        stored = -1
        for ep in range(1, 4000):
            for g in range(2):
                run.run_episode(Task.COFFEE, g, ep)
            if sum(learner.counts()) != stored:
                stored = sum(learner.counts())
                last_change = ep
            elif ep - last_change > 300 and learner.counts()[0] >= 1:
                break
        assert learner.counts()[0] >= 1 and learner.counts()[1] >= 1
        deadend_records = []
        for ep in range(5000, 5400):
            rec = run.run_episode(Task.COFFEE, 0, ep)
            if rec.status == STATUS_DEAD_END:
                deadend_records.append(rec)
        assert deadend_records
        assert all(r.counterexample is None for r in deadend_records)

    def test_qbank_reset_after_relearn(self):
        run = InterleavedRun(desk_config(seed=1))
        for ep in range(1, 1000):
            for g in range(2):
                rec = run.run_episode(Task.COFFEE, g, ep)
                if rec.relearned:
                    prefix = (Task.COFFEE.value,)
                    for key, table in run.qbank.tables.items():
                        if key[: len(prefix)] == prefix:
                            assert all(v == 0.0 for row in table for v in row)
                    return
        pytest.fail("no relearn happened")

    def test_episode_length_cap(self):
        cfg = desk_config(episode_len=7)
        run = InterleavedRun(cfg)
        rec = run.run_episode(Task.COFFEE, 0, 1)
        assert rec.steps <= 7


class TestRunExperiment:
    def test_metrics_schema_and_determinism(self):
        cfg = desk_config(episodes_per_grid=100, eval_every=50)
        first = run_experiment(cfg)
        second = run_experiment(cfg)
        assert first.metrics_rows  # 2 grids x 2 eval points
        columns = {
            "episode", "task", "grid", "greedy_return", "steps", "relearn_flag",
            "num_automaton_states", "cum_solver_time_ms", "n_pos", "n_neg", "n_inc",
        }
        assert set(first.metrics_rows[0]) == columns
        strip = lambda rows: [
            {k: v for k, v in r.items() if k != "cum_solver_time_ms"} for r in rows
        ]
        assert strip(first.metrics_rows) == strip(second.metrics_rows)
        assert first.final_automata == second.final_automata
        assert first.example_counts == second.example_counts

    def test_theorem_invariants_on_runs(self):
        result = run_experiment(desk_config(episodes_per_grid=400, seed=5))
        for task in result.tasks:
            assert result.coverage_failure_counts[task] == 0
            assert result.relearn_counts[task] < 50

    def test_qrm_only_mode_zero_counterexamples(self):
        cfg = desk_config(learn_automata=False, episodes_per_grid=150)
        result = run_experiment(cfg)
        assert result.counterexample_counts["coffee"] == 0
        assert result.final_automata["coffee"] == coffee_automaton(
            InterleavedRun(cfg).learners[Task.COFFEE].alphabet
        ).to_text()

    def test_multitask_updates_share_experience(self):
        cfg = ExperimentConfig(
            setting="M", tasks=(Task.COFFEE, Task.COFFEE_MAIL), seed=2,
            num_grids=1, episodes_per_grid=60, eval_every=30,
        )
        run = InterleavedRun(cfg)
        for ep in range(1, 61):
            for t in run.tasks:
                run.run_episode(t, 0, ep)
        # both tasks' tables exist even though each episode served one task
        prefixes = {key[0] for key in run.qbank.tables}
        assert prefixes == {"coffee", "coffee_mail"}

    def test_setting_validation(self):
        with pytest.raises(ValueError):
            InterleavedRun(desk_config(setting="Q"))
        with pytest.raises(ValueError):
            InterleavedRun(ExperimentConfig(setting="S",
                                            tasks=(Task.COFFEE, Task.COFFEE_MAIL)))
