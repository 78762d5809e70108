"""Exact learner: minimal subgoal automata consistent with labeled traces.

The hypothesis space for ``num_states`` = 3 + k automata is: initial state
u0, intermediate states u1..uk, accepting uA and rejecting uR; edges between
non-terminal states run from lower to higher index (symmetry breaking, which
also forces acyclicity); no self-loops (the frame axiom supplies them), no
edges out of uA/uR; every non-terminal state has at least one outgoing edge;
conditions across different edges of one state are mutually exclusive over
the whole powerset of the alphabet, so learned automata can never raise a
determinism violation at runtime.

Consistency of a hypothesis with the examples is strict with respect to
terminal states: a positive (negative) trace must reach uA (uR) exactly when
its final observation set is consumed and must stay non-terminal before; an
incomplete trace must stay non-terminal throughout.  This mirrors a trace
semantics in which state propagation stops at terminal states, and it is a
sound strengthening of the runtime verdict semantics (absorbing early stop),
so every solution also passes :func:`check_consistency`.

The search branches over next-state assignments for the (state, observation
set) pairs actually exercised by the examples, organized as a prefix trie,
and synthesizes minimal edge conditions per state once an assignment is
complete.  It returns the consistent automaton minimizing total literal
count, ties broken by a lexicographic key over (source, target, condition
literals with positives before negatives, observable id).
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Iterable, Optional

from .automaton import Condition, DeterminismViolation, Edge, SubgoalAutomaton, VerdictKind
from .traces import Alphabet, ObservationTrace, TraceLabel, is_compressed


class BudgetExceeded(Exception):
    """The configured search-node budget ran out before an answer was proven."""

    def __init__(self, nodes: int):
        self.nodes = nodes
        super().__init__(f"search budget exhausted after {nodes} nodes")


@dataclass(frozen=True)
class AutomatonLearningTask:
    """Labeled compressed example traces plus structural bounds."""

    alphabet: Alphabet
    positive: tuple[ObservationTrace, ...]
    negative: tuple[ObservationTrace, ...]
    incomplete: tuple[ObservationTrace, ...]
    max_states: int = 10
    max_edges_per_pair: int = 1
    node_budget: int = 10**8

    def __post_init__(self):
        if self.max_states < 3:
            raise ValueError("max_states must be at least 3")
        if self.max_edges_per_pair < 1:
            raise ValueError("max_edges_per_pair must be positive")
        for trace in self.all_traces():
            if trace.alphabet != self.alphabet:
                raise ValueError("example trace alphabet differs from task alphabet")
            if not is_compressed(trace):
                raise ValueError(f"solver consumes compressed traces only, got {trace!r}")

    @classmethod
    def from_traces(cls, alphabet: Alphabet, traces: Iterable[ObservationTrace],
                    **kwargs) -> "AutomatonLearningTask":
        groups = {TraceLabel.POSITIVE: [], TraceLabel.NEGATIVE: [], TraceLabel.INCOMPLETE: []}
        for t in traces:
            groups[t.label].append(t)
        return cls(
            alphabet,
            tuple(groups[TraceLabel.POSITIVE]),
            tuple(groups[TraceLabel.NEGATIVE]),
            tuple(groups[TraceLabel.INCOMPLETE]),
            **kwargs,
        )

    def all_traces(self) -> tuple[ObservationTrace, ...]:
        return self.positive + self.negative + self.incomplete

    def counts(self) -> tuple[int, int, int]:
        return len(self.positive), len(self.negative), len(self.incomplete)


@dataclass
class SolveStats:
    wall_time_s: float = 0.0
    nodes_explored: int = 0
    num_states: int = 0
    literal_count: int = 0


@dataclass
class SolveOutcome:
    automaton: Optional[SubgoalAutomaton]
    unsat_at: Optional[int]
    stats: SolveStats

    @property
    def is_solution(self) -> bool:
        return self.automaton is not None


@dataclass(frozen=True)
class ConsistencyResult:
    ok: bool
    failing_trace: Optional[ObservationTrace] = None

    def __bool__(self) -> bool:
        return self.ok


_EXPECTED_KIND = {
    TraceLabel.POSITIVE: VerdictKind.ACCEPTED,
    TraceLabel.NEGATIVE: VerdictKind.REJECTED,
    TraceLabel.INCOMPLETE: VerdictKind.NEITHER,
}


def oracle_label(automaton: SubgoalAutomaton, steps: tuple[int, ...]) -> Optional[TraceLabel]:
    """Label a step sequence the way an episode under this automaton would.

    Episodes end exactly when a terminal state is reached, so sequences on
    which the automaton hits uA or uR before the final observation set are
    not episode-realizable and yield None.  Used to derive labeled example
    sets from a known automaton.
    """
    probe = ObservationTrace(automaton.alphabet, steps, TraceLabel.INCOMPLETE)
    try:
        verdict = automaton.run(probe)
    except DeterminismViolation:
        return None
    if len(verdict.state_sequence) < len(steps):
        return None
    if verdict.kind is VerdictKind.ACCEPTED:
        return TraceLabel.POSITIVE
    if verdict.kind is VerdictKind.REJECTED:
        return TraceLabel.NEGATIVE
    return TraceLabel.INCOMPLETE


def check_consistency(
    automaton: SubgoalAutomaton,
    examples: AutomatonLearningTask | Iterable[ObservationTrace],
) -> ConsistencyResult:
    """Runtime-verdict consistency: accepted/rejected/neither per trace label.

    A determinism violation during any run counts as inconsistent.
    """
    traces = examples.all_traces() if isinstance(examples, AutomatonLearningTask) else examples
    for trace in traces:
        try:
            verdict = automaton.run(trace)
        except DeterminismViolation:
            return ConsistencyResult(False, trace)
        if verdict.kind is not _EXPECTED_KIND[trace.label]:
            return ConsistencyResult(False, trace)
    return ConsistencyResult(True)


# --- example trie ---------------------------------------------------------


class _TrieNode:
    __slots__ = ("children", "label", "conflict")

    def __init__(self):
        self.children: dict[int, "_TrieNode"] = {}
        self.label: Optional[TraceLabel] = None
        self.conflict = False


def _build_trie(task: AutomatonLearningTask) -> tuple[_TrieNode, bool]:
    """Prefix trie of all example traces; flags label contradictions.

    Contradictions make the task unsatisfiable at every size: the same trace
    under two labels, or a positive/negative trace that is a proper prefix of
    another example (a terminal state would have to be left again).
    """
    root = _TrieNode()
    unsat = False
    for trace in task.all_traces():
        node = root
        for mask in trace.steps:
            child = node.children.get(mask)
            if child is None:
                child = node.children[mask] = _TrieNode()
            node = child
        if node.label is not None and node.label is not trace.label:
            unsat = True
        node.label = trace.label
    # terminal labels on internal nodes cannot be realized
    stack = [root]
    while stack:
        node = stack.pop()
        for child in node.children.values():
            if child.children and child.label in (TraceLabel.POSITIVE, TraceLabel.NEGATIVE):
                unsat = True
            stack.append(child)
    return root, unsat


# --- fixed-size search -----------------------------------------------------


class _FixedSizeSearch:
    """Complete branch-and-bound over example-driven transition assignments.

    Decisions are next-state assignments for the (state, observation set)
    pairs the examples exercise.  Each assignment propagates through the
    example trie immediately: nodes whose parent state is known take their
    state, end labels force accepting/rejecting targets, and states with a
    single legal continuation are filled in, so conflicts surface at the
    decision that causes them.
    """

    def __init__(self, task: AutomatonLearningTask, num_states: int,
                 stats: SolveStats, deadline_nodes: int):
        self.task = task
        self.alphabet = task.alphabet
        self.full_mask = task.alphabet.full_mask
        self.n = num_states
        self.m = num_states - 2          # non-terminal states 0..m-1
        self.acc = num_states - 2
        self.rej = num_states - 1
        self.k_disjuncts = task.max_edges_per_pair
        self.stats = stats
        self.deadline_nodes = deadline_nodes

        root, self.unsat_everywhere = _build_trie(task)
        # flatten the trie into arrays; children sorted by observation mask
        ids: dict[int, int] = {}
        order: list[_TrieNode] = []
        stack = [root]
        while stack:
            node = stack.pop()
            ids[id(node)] = len(order)
            order.append(node)
            for mask in sorted(node.children, reverse=True):
                stack.append(node.children[mask])
        self.node_label = [node.label for node in order]
        self.node_children = [
            [(mask, ids[id(node.children[mask])]) for mask in sorted(node.children)]
            for node in order
        ]
        self.n_nodes = len(order)

        self.delta: dict[tuple[int, int], int] = {}
        self.node_state = [-1] * self.n_nodes
        self.node_state[0] = 0
        self.pending: dict[tuple[int, int], list[int]] = {}
        self.trail: list[tuple] = []
        self.stays: list[set[int]] = [set() for _ in range(self.m)]
        self.pos: list[dict[int, list[int]]] = [{} for _ in range(self.m)]
        self.ms: list[dict[int, tuple[int, int]]] = [{} for _ in range(self.m)]
        self.lower_bound = self.m  # one literal per non-terminal out-edge minimum

        self.best_cost: Optional[int] = None
        self.best_key: Optional[tuple] = None
        self.best_edges: Optional[list] = None
        self._avoider_cache: dict[frozenset[int], Optional[tuple]] = {}

    # -- feasibility bookkeeping ------------------------------------------

    def _ms_with(self, u: int, target: int, mask: int) -> tuple[int, int]:
        prev = self.ms[u].get(target)
        if prev is None:
            return mask, self.full_mask & ~mask
        pos_cap, neg_cap = prev
        return pos_cap & mask, neg_cap & ~mask

    def _viable(self, pos_cap: int, neg_cap: int, stays: Iterable[int]) -> bool:
        # the full most-specific condition is the best avoider: feasibility of
        # covering Pos while avoiding every stay reduces to these literal caps
        if not (pos_cap | neg_cap):
            return False
        for s in stays:
            if not ((pos_cap & ~s) | (neg_cap & s)):
                return False
        return True

    def _try_assign(self, u: int, mask: int, target: int) -> Optional[tuple]:
        """Record delta[(u, mask)] = target; None if provably infeasible."""
        if target == u:
            if self.k_disjuncts == 1:
                for pos_cap, neg_cap in self.ms[u].values():
                    if not ((pos_cap & ~mask) | (neg_cap & mask)):
                        return None
            self.stays[u].add(mask)
            return (u, mask, None)
        pos_cap, neg_cap = self._ms_with(u, target, mask)
        if self.k_disjuncts == 1:
            if not self._viable(pos_cap, neg_cap, self.stays[u]):
                return None
            for w, (op, on) in self.ms[u].items():
                if w != target and not ((pos_cap & on) | (neg_cap & op)):
                    return None  # no complementary literal pair can exist
        prev = self.ms[u].get(target)
        added_target = prev is None
        if added_target and len(self.ms[u]) >= 1:
            self.lower_bound += 1
        self.ms[u][target] = (pos_cap, neg_cap)
        self.pos[u].setdefault(target, []).append(mask)
        return (u, mask, (target, prev, added_target))

    def _undo(self, undo: tuple) -> None:
        u, mask, move = undo
        if move is None:
            self.stays[u].discard(mask)
            return
        target, prev, added_target = move
        self.pos[u][target].pop()
        if added_target:
            del self.ms[u][target]
            del self.pos[u][target]
            if len(self.ms[u]) >= 1:
                self.lower_bound -= 1
        else:
            self.ms[u][target] = prev

    # -- search -------------------------------------------------------------

    def _required_target(self, child: int, u: int) -> Optional[int]:
        """Forced next state for a trie node, or None when it is a free choice."""
        label = self.node_label[child]
        if label is TraceLabel.POSITIVE:
            return self.acc
        if label is TraceLabel.NEGATIVE:
            return self.rej
        if u == self.m - 1:
            return u  # staying is the only non-terminal continuation
        return None

    def _set_node_state(self, child: int, target: int, queue: list[int]) -> bool:
        label = self.node_label[child]
        if label is TraceLabel.POSITIVE:
            if target != self.acc:
                return False
        elif label is TraceLabel.NEGATIVE:
            if target != self.rej:
                return False
        elif target >= self.acc:
            return False  # internal nodes and incomplete ends stay non-terminal
        self.node_state[child] = target
        self.trail.append(("state", child))
        if self.node_children[child]:
            queue.append(child)
        return True

    def _assign_key(self, key: tuple[int, int], target: int, queue: list[int]) -> bool:
        self.stats.nodes_explored += 1
        if self.stats.nodes_explored > self.deadline_nodes:
            raise BudgetExceeded(self.stats.nodes_explored)
        undo = self._try_assign(key[0], key[1], target)
        if undo is None:
            return False
        self.delta[key] = target
        self.trail.append(("delta", key, undo))
        if self.best_cost is not None and self.lower_bound > self.best_cost:
            return False
        for child in self.pending.get(key, ()):
            if not self._set_node_state(child, target, queue):
                return False
        return True

    def _propagate(self, queue: list[int]) -> bool:
        """Cascade known node states through the trie; False on conflict."""
        while queue:
            parent = queue.pop()
            u = self.node_state[parent]
            for mask, child in self.node_children[parent]:
                key = (u, mask)
                target = self.delta.get(key)
                if target is not None:
                    if not self._set_node_state(child, target, queue):
                        return False
                    continue
                required = self._required_target(child, u)
                if required is not None:
                    if not self._assign_key(key, required, queue):
                        return False
                    if not self._set_node_state(child, required, queue):
                        return False
                else:
                    self.pending.setdefault(key, []).append(child)
                    self.trail.append(("pend", key))
        return True

    def _unwind(self, mark: int) -> None:
        while len(self.trail) > mark:
            entry = self.trail.pop()
            kind = entry[0]
            if kind == "state":
                self.node_state[entry[1]] = -1
            elif kind == "pend":
                self.pending[entry[1]].pop()
            else:
                del self.delta[entry[1]]
                self._undo(entry[2])

    def _pick_key(self) -> Optional[tuple[int, int]]:
        """Most-constrained undecided key: fewest targets, then mask order."""
        best = None
        best_rank = None
        for key, waiters in self.pending.items():
            if not waiters or key in self.delta:
                continue
            # only nodes with an undecided state still wait on this key
            if all(self.node_state[c] != -1 for c in waiters):
                continue
            rank = (self.m - key[0], key[1], key[0])
            if best_rank is None or rank < best_rank:
                best_rank = rank
                best = key
        return best

    def run(self) -> None:
        """Exhaustive search: decide pending keys, propagate, backtrack."""
        if self.unsat_everywhere:
            return
        if not self._propagate([0]):
            self._unwind(0)
            return
        # decision frame: [key, options, next_index, trail_mark]
        decisions: list[list] = []
        descend = True
        while True:
            if descend:
                key = self._pick_key()
                if key is not None:
                    u = key[0]
                    decisions.append([key, (u, *range(u + 1, self.m)), 0, len(self.trail)])
                else:
                    self._finalize()
                    if not decisions:
                        return
            descend = False
            while decisions:
                frame = decisions[-1]
                key, options, idx, mark = frame
                self._unwind(mark)
                if idx >= len(options):
                    decisions.pop()
                    continue
                frame[2] = idx + 1
                queue: list[int] = []
                if self._assign_key(key, options[idx], queue) and self._propagate(queue):
                    descend = True
                    break
            if not descend and not decisions:
                return

    # -- condition synthesis --------------------------------------------------

    def _literal_key(self, pos_mask: int, neg_mask: int) -> tuple:
        key = [(0, i) for i in range(len(self.alphabet)) if pos_mask >> i & 1]
        key += [(1, i) for i in range(len(self.alphabet)) if neg_mask >> i & 1]
        key.sort()
        return tuple(key)

    def _candidates(self, pos_cap: int, neg_cap: int, stays: set[int]) -> list[tuple]:
        """Nonempty sub-conditions of the literal caps avoiding every stay.

        Returns (size, key, pos_mask, neg_mask) sorted by (size, key).
        """
        literals = [(1 << i, 0) for i in range(len(self.alphabet)) if pos_cap >> i & 1]
        literals += [(0, 1 << i) for i in range(len(self.alphabet)) if neg_cap >> i & 1]
        out = []
        for r in range(1, len(literals) + 1):
            for combo in itertools.combinations(literals, r):
                p = n = 0
                for lp, ln in combo:
                    p |= lp
                    n |= ln
                if all((p & ~s) | (n & s) for s in stays):
                    out.append((r, self._literal_key(p, n), p, n))
        out.sort(key=lambda c: (c[0], c[1]))
        return out

    def _minimal_avoiding_condition(self, stays: set[int]) -> Optional[tuple]:
        """Cheapest single condition over the alphabet avoiding all stays."""
        cache_key = frozenset(stays)
        if cache_key in self._avoider_cache:
            return self._avoider_cache[cache_key]
        best = None
        n_obs = len(self.alphabet)
        literals = [(1 << i, 0) for i in range(n_obs)] + [(0, 1 << i) for i in range(n_obs)]
        for r in range(1, n_obs + 1):
            found = []
            for combo in itertools.combinations(literals, r):
                p = n = 0
                ok = True
                for lp, ln in combo:
                    if (p | n) & (lp | ln):
                        ok = False  # contradictory or duplicate literal
                        break
                    p |= lp
                    n |= ln
                if ok and all((p & ~s) | (n & s) for s in stays):
                    found.append((r, self._literal_key(p, n), p, n))
            if found:
                best = min(found, key=lambda c: c[1])
                break
        self._avoider_cache[cache_key] = best
        return best

    def _partitions(self, masks: list[int], max_blocks: int):
        """Set partitions of masks into at most max_blocks blocks (canonical)."""
        if not masks:
            yield []
            return
        first, rest = masks[0], masks[1:]
        for part in self._partitions(rest, max_blocks):
            for i in range(len(part)):
                part[i].append(first)
                yield part
                part[i].pop()
            if len(part) < max_blocks:
                part.append([first])
                yield part
                part.pop()

    def _target_options(self, u: int, w: int) -> list[tuple]:
        """Disjunct-tuple options for edge u->w: (cost, key, ((p, n), ...))."""
        masks = self.pos[u][w]
        stays = self.stays[u]
        if self.k_disjuncts == 1:
            pos_cap, neg_cap = self.ms[u][w]
            return [
                (size, (key,), ((p, n),))
                for size, key, p, n in self._candidates(pos_cap, neg_cap, stays)
            ]
        options = []
        seen_blocks: dict[tuple, list[tuple]] = {}
        for part in self._partitions(sorted(masks), self.k_disjuncts):
            per_block = []
            for block in part:
                bkey = tuple(sorted(block))
                cands = seen_blocks.get(bkey)
                if cands is None:
                    pos_cap = self.full_mask
                    union = 0
                    for mask in block:
                        pos_cap &= mask
                        union |= mask
                    cands = self._candidates(pos_cap, self.full_mask & ~union, stays)
                    seen_blocks[bkey] = cands
                if not cands:
                    per_block = None
                    break
                per_block.append(cands)
            if per_block is None:
                continue
            for combo in itertools.product(*per_block):
                cost = sum(c[0] for c in combo)
                disjuncts = tuple(sorted((c[1], c[2], c[3]) for c in combo))
                options.append(
                    (cost, tuple(d[0] for d in disjuncts),
                     tuple((d[1], d[2]) for d in disjuncts))
                )
        options.sort(key=lambda o: (o[0], o[1]))
        # drop dominated duplicates (same disjunct set reached via permuted partitions)
        deduped = []
        seen = set()
        for opt in options:
            if opt[2] not in seen:
                seen.add(opt[2])
                deduped.append(opt)
        return deduped

    def _synthesize_state(self, u: int) -> Optional[tuple[int, tuple, list]]:
        """Minimal-cost exclusive conditions for all observed targets of u."""
        targets = sorted(self.ms[u])
        if not targets:
            cond = self._minimal_avoiding_condition(self.stays[u])
            if cond is None:
                return None
            target = u + 1 if u + 1 < self.m else self.acc
            size, key, p, n = cond
            return size, ((u, target, (key,)),), [(u, target, ((p, n),))]
        options = [self._target_options(u, w) for w in targets]
        if any(not opts for opts in options):
            return None
        min_costs = [opts[0][0] for opts in options]
        suffix_min = [0] * (len(targets) + 1)
        for i in range(len(targets) - 1, -1, -1):
            suffix_min[i] = suffix_min[i + 1] + min_costs[i]

        best: list = [None, None, None]  # cost, key, chosen

        def exclusive(d1: tuple, d2: tuple) -> bool:
            return all(
                (p1 & n2) | (n1 & p2)
                for (p1, n1) in d1 for (p2, n2) in d2
            )

        chosen: list[tuple] = []

        def rec(i: int, cost: int) -> None:
            self.stats.nodes_explored += 1
            if best[0] is not None and cost + suffix_min[i] > best[0]:
                return
            if i == len(targets):
                key = tuple(
                    (u, targets[j], chosen[j][1]) for j in range(len(targets))
                )
                if best[0] is None or (cost, key) < (best[0], best[1]):
                    best[0], best[1] = cost, key
                    best[2] = [
                        (u, targets[j], chosen[j][2]) for j in range(len(targets))
                    ]
                return
            for opt in options[i]:
                if best[0] is not None and cost + opt[0] + suffix_min[i + 1] > best[0]:
                    break  # options sorted by cost
                if all(exclusive(opt[2], prior[2]) for prior in chosen):
                    chosen.append(opt)
                    rec(i + 1, cost + opt[0])
                    chosen.pop()

        rec(0, 0)
        if best[0] is None:
            return None
        return best[0], best[1], best[2]

    def _finalize(self) -> None:
        total = 0
        key_parts = []
        edge_parts = []
        for u in range(self.m):
            synth = self._synthesize_state(u)
            if synth is None:
                return
            cost, key, edges = synth
            total += cost
            if self.best_cost is not None and total > self.best_cost:
                return
            key_parts.extend(key)
            edge_parts.extend(edges)
        key = tuple(key_parts)
        if self.best_cost is None or (total, key) < (self.best_cost, self.best_key):
            self.best_cost = total
            self.best_key = key
            self.best_edges = edge_parts

    def build_automaton(self) -> Optional[SubgoalAutomaton]:
        if self.best_edges is None:
            return None
        names = ["u0"] + [f"u{i}" for i in range(1, self.m)] + ["uA", "uR"]
        edges = []
        for u, w, disjuncts in self.best_edges:
            conditions = tuple(
                Condition(
                    frozenset(self.alphabet.decode(p)),
                    frozenset(self.alphabet.decode(n)),
                )
                for p, n in disjuncts
            )
            edges.append(Edge(names[u], names[w], conditions))
        return SubgoalAutomaton(names, self.alphabet, edges, self.task.max_edges_per_pair)


def solve_fixed_states(task: AutomatonLearningTask, num_states: int,
                       _stats: Optional[SolveStats] = None) -> SolveOutcome:
    """Search automata with exactly ``num_states`` states; exact minimality.

    Returns the consistent automaton minimizing total literal count (ties
    broken lexicographically), or an unsatisfiable outcome for this size.
    """
    if not 3 <= num_states <= task.max_states:
        raise ValueError(f"num_states must be in [3, {task.max_states}], got {num_states}")
    stats = _stats if _stats is not None else SolveStats()
    start = time.perf_counter()
    search = _FixedSizeSearch(task, num_states, stats, task.node_budget)
    try:
        search.run()
    finally:
        stats.wall_time_s += time.perf_counter() - start
    automaton = search.build_automaton()
    if automaton is None:
        return SolveOutcome(None, num_states, stats)
    stats.num_states = num_states
    stats.literal_count = search.best_cost or 0
    return SolveOutcome(automaton, None, stats)


def find_minimal_automaton(task: AutomatonLearningTask) -> SolveOutcome:
    """Iterative deepening over the state count: first satisfiable size wins."""
    stats = SolveStats()
    for num_states in range(3, task.max_states + 1):
        outcome = solve_fixed_states(task, num_states, _stats=stats)
        if outcome.is_solution:
            return outcome
    return SolveOutcome(None, task.max_states, stats)


# --- brute-force reference enumerator --------------------------------------
#
# Independent cross-check for small instances: enumerate every automaton in
# the hypothesis space directly and test each against the examples with a
# standalone strict-run interpreter.  Only single-disjunct edges supported.


def _all_conditions(n_obs: int) -> list[tuple[int, int]]:
    conditions = []
    for assignment in itertools.product((0, 1, 2), repeat=n_obs):
        p = n = 0
        for i, kind in enumerate(assignment):
            if kind == 1:
                p |= 1 << i
            elif kind == 2:
                n |= 1 << i
        if p | n:
            conditions.append((p, n))
    return conditions


def _mutually_exclusive(c1: tuple[int, int], c2: tuple[int, int]) -> bool:
    return bool((c1[0] & c2[1]) | (c1[1] & c2[0]))


def _source_combos(source: int, num_states: int, conditions, enforce_ordering: bool):
    """All valid outgoing edge assignments for one non-terminal state."""
    m = num_states - 2
    if enforce_ordering:
        targets = list(range(source + 1, m)) + [num_states - 2, num_states - 1]
    else:
        targets = [t for t in range(num_states) if t != source]
        # terminal targets stay valid; order mirrors the constrained case
    combos = []

    def rec(i: int, chosen: list):
        if i == len(targets):
            if chosen:
                combos.append(tuple(chosen))
            return
        rec(i + 1, chosen)  # no edge to this target
        for cond in conditions:
            if all(_mutually_exclusive(cond, c) for _, c in chosen):
                chosen.append((targets[i], cond))
                rec(i + 1, chosen)
                chosen.pop()

    rec(0, [])
    return combos


def _strict_consistent(out_edges, num_states: int, traces) -> bool:
    acc = num_states - 2
    for steps, label in traces:
        u = 0
        last = len(steps) - 1
        ok = True
        for i, mask in enumerate(steps):
            nxt = u
            for target, (p, n) in out_edges[u]:
                if mask & p == p and not mask & n:
                    nxt = target
                    break
            u = nxt
            if u >= acc and i != last:
                ok = False  # terminal state reached before the trace ends
                break
        if not ok:
            return False
        if label is TraceLabel.POSITIVE and u != acc:
            return False
        if label is TraceLabel.NEGATIVE and u != acc + 1:
            return False
        if label is TraceLabel.INCOMPLETE and u >= acc:
            return False
    return True


def brute_force_minimal(
    task: AutomatonLearningTask,
    enforce_ordering: bool = True,
) -> Optional[tuple[int, int]]:
    """Minimal (state count, literal count) by exhaustive enumeration.

    Returns None when no automaton with at most ``task.max_states`` states is
    consistent with the examples.  Intended for tiny cross-check instances.
    """
    if task.max_edges_per_pair != 1:
        raise ValueError("reference enumerator supports max_edges_per_pair=1 only")
    conditions = _all_conditions(len(task.alphabet))
    traces = [(t.steps, t.label) for t in task.all_traces()]
    for num_states in range(3, task.max_states + 1):
        m = num_states - 2
        per_source = [
            _source_combos(source, num_states, conditions, enforce_ordering)
            for source in range(m)
        ]
        best: Optional[int] = None
        for assignment in itertools.product(*per_source):
            cost = sum(
                bin(p | n).count("1") for combo in assignment for _, (p, n) in combo
            )
            if best is not None and cost >= best:
                continue
            out_edges = list(assignment)
            if _strict_consistent(out_edges, num_states, traces):
                best = cost
        if best is not None:
            return num_states, best
    return None
