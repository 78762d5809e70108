"""Subgoal automata for reinforcement learning.

Library for inducing minimal subgoal automata from labeled observation
traces and exploiting them with per-automaton-state tabular Q-learning,
interleaving the two so the automaton is refined whenever an episode
produces a trace the current automaton misclassifies.
"""

from .automaton import (
    AutomatonParseError,
    Condition,
    DeterminismViolation,
    Edge,
    SubgoalAutomaton,
    Verdict,
    VerdictKind,
    equivalent,
    find_distinguishing_trace,
    parse_automaton,
    satisfies,
)
from .induction import (
    AutomatonLearningTask,
    BudgetExceeded,
    ConsistencyResult,
    SolveOutcome,
    SolveStats,
    brute_force_minimal,
    check_consistency,
    find_minimal_automaton,
    solve_fixed_states,
)
from .traces import (
    Alphabet,
    ObservationTrace,
    TraceLabel,
    compress,
    enumerate_compressed_steps,
    label_from_outcome,
    load_traces,
    save_traces,
)

__all__ = [
    "Alphabet",
    "AutomatonLearningTask",
    "AutomatonParseError",
    "BudgetExceeded",
    "Condition",
    "ConsistencyResult",
    "DeterminismViolation",
    "Edge",
    "ObservationTrace",
    "SolveOutcome",
    "SolveStats",
    "SubgoalAutomaton",
    "TraceLabel",
    "Verdict",
    "VerdictKind",
    "brute_force_minimal",
    "check_consistency",
    "compress",
    "enumerate_compressed_steps",
    "equivalent",
    "find_distinguishing_trace",
    "find_minimal_automaton",
    "label_from_outcome",
    "load_traces",
    "parse_automaton",
    "satisfies",
    "save_traces",
    "solve_fixed_states",
]

__version__ = "0.1.0"
