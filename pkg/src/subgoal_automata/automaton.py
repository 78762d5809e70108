"""Subgoal automata: data model, deterministic stepping, verdicts, distances.

An automaton is a DFA over observation sets whose edges carry conditions in
DNF: each edge holds up to ``max_edges_per_pair`` conjunctions of positive and
negated observables.  A state self-loops whenever no outgoing condition is
satisfied (frame axiom); the accepting and rejecting states have no outgoing
edges and absorb the rest of a trace.

State naming convention: the state list is in index order, the initial state
is first and the accepting/rejecting states occupy the two highest indices
(named ``uA`` and ``uR`` throughout).
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

from .traces import Alphabet, ObservationTrace, enumerate_compressed_steps


class DeterminismViolation(Exception):
    """Two outgoing edges to distinct targets fired on the same observation."""

    def __init__(self, state: str, obs: frozenset[str], targets: tuple[str, ...],
                 step_index: Optional[int] = None):
        self.state = state
        self.obs = obs
        self.targets = targets
        self.step_index = step_index
        at = f" at step {step_index}" if step_index is not None else ""
        super().__init__(
            f"observation {set(obs) or '{}'} satisfies edges from {state} "
            f"to {', '.join(targets)}{at}"
        )


@dataclass(frozen=True)
class Condition:
    """A conjunction of observable literals (positive and negated)."""

    positives: frozenset[str]
    negatives: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "positives", frozenset(self.positives))
        object.__setattr__(self, "negatives", frozenset(self.negatives))
        if self.positives & self.negatives:
            raise ValueError(
                f"condition has contradictory literals: {self.positives & self.negatives}"
            )
        if not (self.positives | self.negatives):
            raise ValueError("condition must contain at least one literal")

    def satisfied_by(self, obs: Iterable[str]) -> bool:
        obs = frozenset(obs)
        return self.positives <= obs and not (self.negatives & obs)

    def symbols(self) -> frozenset[str]:
        return self.positives | self.negatives

    def sort_key(self, alphabet: Alphabet) -> tuple:
        # positives sort before negatives, then by observable id
        return tuple(sorted(
            (0 if s in self.positives else 1, alphabet.index(s))
            for s in self.symbols()
        ))

    def format(self, alphabet: Optional[Alphabet] = None) -> str:
        if alphabet is not None:
            order = {s: i for i, s in enumerate(alphabet.symbols)}
            pos = sorted(self.positives, key=order.__getitem__)
            neg = sorted(self.negatives, key=order.__getitem__)
        else:
            pos, neg = sorted(self.positives), sorted(self.negatives)
        return " & ".join(list(pos) + ["!" + s for s in neg])

    def __repr__(self) -> str:
        return f"Condition({self.format()})"


def satisfies(obs: Iterable[str], cond: Condition) -> bool:
    """True iff the observation set satisfies the condition."""
    return cond.satisfied_by(obs)


@dataclass(frozen=True)
class Edge:
    """All transitions between one ordered state pair, as a list of disjuncts."""

    source: str
    target: str
    conditions: tuple[Condition, ...]

    def __post_init__(self):
        object.__setattr__(self, "conditions", tuple(self.conditions))
        if not self.conditions:
            raise ValueError("edge needs at least one condition")
        if self.source == self.target:
            raise ValueError("explicit self-loops are implicit (frame axiom)")


class SubgoalAutomaton:
    """Deterministic subgoal automaton ⟨states, alphabet, edges, u0, uA, uR⟩."""

    def __init__(
        self,
        states: Sequence[str],
        alphabet: Alphabet,
        edges: Iterable[Edge] = (),
        max_edges_per_pair: int = 1,
    ):
        states = tuple(states)
        if len(states) < 3:
            raise ValueError("need at least initial, accepting and rejecting states")
        if len(set(states)) != len(states):
            raise ValueError(f"duplicate state ids: {states}")
        if max_edges_per_pair < 1:
            raise ValueError("max_edges_per_pair must be positive")
        self.states = states
        self.alphabet = alphabet
        self.max_edges_per_pair = max_edges_per_pair
        self.initial_state = states[0]
        self.accepting_state = states[-2]
        self.rejecting_state = states[-1]
        self._index = {s: i for i, s in enumerate(states)}

        edges = tuple(edges)
        seen_pairs = set()
        for e in edges:
            if e.source not in self._index or e.target not in self._index:
                raise ValueError(f"edge {e.source}->{e.target} uses unknown state")
            if e.source in (self.accepting_state, self.rejecting_state):
                raise ValueError(f"terminal state {e.source} cannot have outgoing edges")
            if (e.source, e.target) in seen_pairs:
                raise ValueError(f"duplicate edge for pair {e.source}->{e.target}")
            seen_pairs.add((e.source, e.target))
            if len(e.conditions) > max_edges_per_pair:
                raise ValueError(
                    f"edge {e.source}->{e.target} has {len(e.conditions)} disjuncts "
                    f"(max {max_edges_per_pair})"
                )
            for cond in e.conditions:
                for sym in cond.symbols():
                    if sym not in alphabet:
                        raise ValueError(f"condition symbol {sym!r} not in alphabet")
        self.edges = edges

        # per-state outgoing adjacency compiled to bitmasks, in target order
        n = len(states)
        self._out: list[list[tuple[int, list[tuple[int, int]]]]] = [[] for _ in range(n)]
        for e in sorted(edges, key=lambda e: (self._index[e.source], self._index[e.target])):
            masks = [
                (alphabet.encode(c.positives), alphabet.encode(c.negatives))
                for c in e.conditions
            ]
            self._out[self._index[e.source]].append((self._index[e.target], masks))
        self._accept_idx = n - 2
        self._reject_idx = n - 1
        self._step_cache: dict[tuple[int, int], int] = {}

    # --- basic queries --------------------------------------------------

    def __len__(self) -> int:
        return len(self.states)

    def state_index(self, state: str) -> int:
        try:
            return self._index[state]
        except KeyError:
            raise ValueError(f"unknown state {state!r}") from None

    def is_terminal(self, state: str) -> bool:
        return state in (self.accepting_state, self.rejecting_state)

    def literal_count(self) -> int:
        return sum(
            len(c.positives) + len(c.negatives)
            for e in self.edges for c in e.conditions
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SubgoalAutomaton):
            return NotImplemented
        return (
            self.states == other.states
            and self.alphabet == other.alphabet
            and self.max_edges_per_pair == other.max_edges_per_pair
            and sorted(self.edges, key=lambda e: (e.source, e.target))
            == sorted(other.edges, key=lambda e: (e.source, e.target))
        )

    # --- stepping semantics ----------------------------------------------

    def step_index(self, u: int, obs_mask: int) -> int:
        """Next state index for an observation bitmask; raises on ambiguity."""
        key = (u, obs_mask)
        cached = self._step_cache.get(key)
        if cached is not None:
            if cached == -1:
                self._raise_violation(u, obs_mask)
            return cached
        if u >= self._accept_idx:
            nxt = u  # terminal states absorb
        else:
            nxt = u
            hit = False
            for target, masks in self._out[u]:
                for pos, neg in masks:
                    if obs_mask & pos == pos and not obs_mask & neg:
                        if hit and target != nxt:
                            self._step_cache[key] = -1
                            self._raise_violation(u, obs_mask)
                        nxt = target
                        hit = True
                        break
        self._step_cache[key] = nxt
        return nxt

    def _raise_violation(self, u: int, obs_mask: int) -> None:
        obs = self.alphabet.decode(obs_mask)
        targets = []
        for target, masks in self._out[u]:
            if any(obs_mask & p == p and not obs_mask & n for p, n in masks):
                targets.append(self.states[target])
        raise DeterminismViolation(self.states[u], obs, tuple(targets))

    def step(self, state: str, obs: Iterable[str]) -> str:
        """Deterministic transition on an observation set (frame axiom on miss)."""
        return self.states[self.step_index(self.state_index(state), self.alphabet.encode(obs))]

    def run(self, trace: ObservationTrace) -> "Verdict":
        """Run a trace from the initial state; absorbing early stop at uA/uR.

        The state sequence holds one state per consumed observation set;
        consumption stops once a terminal state is reached.
        """
        u = 0
        sequence = []
        for i, mask in enumerate(trace.steps):
            try:
                u = self.step_index(u, mask)
            except DeterminismViolation as exc:
                exc.step_index = i
                raise
            sequence.append(self.states[u])
            if u >= self._accept_idx:
                break
        if u == self._accept_idx:
            kind = VerdictKind.ACCEPTED
        elif u == self._reject_idx:
            kind = VerdictKind.REJECTED
        else:
            kind = VerdictKind.NEITHER
        return Verdict(kind, tuple(sequence))

    # --- distances and potentials ----------------------------------------

    def distances_to_accepting(self) -> dict[str, float]:
        """Shortest directed edge count from each state to uA (inf if unreachable)."""
        n = len(self.states)
        preds: list[list[int]] = [[] for _ in range(n)]
        for e in self.edges:
            preds[self._index[e.target]].append(self._index[e.source])
        dist = [math.inf] * n
        dist[self._accept_idx] = 0
        queue = deque([self._accept_idx])
        while queue:
            v = queue.popleft()
            for p in preds[v]:
                if dist[p] == math.inf:
                    dist[p] = dist[v] + 1
                    queue.append(p)
        return {s: dist[i] for i, s in enumerate(self.states)}

    def distance_to_accepting(self, state: str) -> float:
        return self.distances_to_accepting()[state]

    # --- serialization ----------------------------------------------------

    def to_text(self) -> str:
        lines = [
            "states: " + " ".join(self.states),
            "alphabet: " + " ".join(self.alphabet.symbols),
            f"max_edges_per_pair: {self.max_edges_per_pair}",
        ]
        for e in sorted(self.edges, key=lambda e: (self._index[e.source], self._index[e.target])):
            conds = " | ".join(c.format(self.alphabet) for c in e.conditions)
            lines.append(f"{e.source} -> {e.target} : {conds}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SubgoalAutomaton":
        return parse_automaton(text)

    def to_dot(self) -> str:
        lines = [
            "digraph subgoal_automaton {",
            "  rankdir=LR;",
            '  __start [shape=point, label=""];',
        ]
        for s in self.states:
            shape = "doublecircle" if s == self.accepting_state else "circle"
            extra = ', style="bold"' if s == self.rejecting_state else ""
            lines.append(f'  "{s}" [shape={shape}{extra}];')
        lines.append(f'  __start -> "{self.initial_state}";')
        for e in sorted(self.edges, key=lambda e: (self._index[e.source], self._index[e.target])):
            label = " | ".join(c.format(self.alphabet) for c in e.conditions)
            lines.append(f'  "{e.source}" -> "{e.target}" [label="{label}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def __repr__(self) -> str:
        return (
            f"SubgoalAutomaton(states={len(self.states)}, edges={len(self.edges)}, "
            f"literals={self.literal_count()})"
        )


class VerdictKind(enum.Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    NEITHER = "neither"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    state_sequence: tuple[str, ...]


# --- parsing ------------------------------------------------------------


class AutomatonParseError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


def _parse_condition(text: str, alphabet: Alphabet, lineno: int, colbase: int) -> Condition:
    positives, negatives = set(), set()
    col = colbase
    for raw in text.split("&"):
        lit = raw.strip()
        if not lit:
            raise AutomatonParseError("empty literal", lineno, col)
        if lit.startswith("!"):
            sym, bucket = lit[1:].strip(), negatives
        else:
            sym, bucket = lit, positives
        if sym not in alphabet:
            raise AutomatonParseError(f"unknown observable {sym!r}", lineno, col)
        bucket.add(sym)
        col += len(raw) + 1
    try:
        return Condition(frozenset(positives), frozenset(negatives))
    except ValueError as exc:
        raise AutomatonParseError(str(exc), lineno, colbase) from None


def parse_automaton(text: str) -> SubgoalAutomaton:
    """Parse the text format emitted by :meth:`SubgoalAutomaton.to_text`."""
    states: Optional[tuple[str, ...]] = None
    alphabet: Optional[Alphabet] = None
    max_edges = 1
    edge_lines: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("states:"):
            names = line[len("states:"):].split()
            if len(set(names)) != len(names):
                raise AutomatonParseError(f"duplicate state id in {names}", lineno)
            if len(names) < 3:
                raise AutomatonParseError("need at least 3 states", lineno)
            states = tuple(names)
        elif line.startswith("alphabet:"):
            try:
                alphabet = Alphabet(line[len("alphabet:"):].split())
            except ValueError as exc:
                raise AutomatonParseError(str(exc), lineno) from None
        elif line.startswith("max_edges_per_pair:"):
            try:
                max_edges = int(line.split(":", 1)[1])
            except ValueError:
                raise AutomatonParseError("max_edges_per_pair must be an integer", lineno) from None
        else:
            edge_lines.append((lineno, line))
    if states is None:
        raise AutomatonParseError("missing 'states:' header", 1)
    if alphabet is None:
        raise AutomatonParseError("missing 'alphabet:' header", 1)

    edges = []
    for lineno, line in edge_lines:
        head, sep, conds_text = line.partition(":")
        if not sep:
            raise AutomatonParseError("expected 'src -> dst : condition'", lineno)
        parts = head.split("->")
        if len(parts) != 2:
            raise AutomatonParseError("expected 'src -> dst' before ':'", lineno)
        src, dst = parts[0].strip(), parts[1].strip()
        if src not in states or dst not in states:
            raise AutomatonParseError(f"unknown state in edge {src}->{dst}", lineno)
        conditions = tuple(
            _parse_condition(part, alphabet, lineno, line.index(":") + 2)
            for part in conds_text.split("|")
        )
        edges.append(Edge(src, dst, conditions))
    try:
        return SubgoalAutomaton(states, alphabet, edges, max_edges)
    except ValueError as exc:
        raise AutomatonParseError(str(exc), 1) from None


# --- equivalence --------------------------------------------------------

_VIOLATION = -2  # sentinel outcome distinct from every state index


def find_distinguishing_trace(
    a: SubgoalAutomaton,
    b: SubgoalAutomaton,
    max_len: int,
    universe: Optional[Sequence[int]] = None,
) -> Optional[tuple[int, ...]]:
    """First compressed step sequence (≤ max_len) on which run verdicts differ.

    Explores the synchronized product of both automata over the observation
    universe (all subsets of the shared alphabet by default), memoizing on
    (state pair, previous observation, remaining length).  A determinism
    violation counts as its own outcome: traces on which both automata raise
    at the same point are indistinguishable.
    """
    if a.alphabet != b.alphabet:
        raise ValueError("equivalence requires a shared alphabet")
    if universe is None:
        universe = range(a.alphabet.full_mask + 1)
    sets = sorted(set(universe))

    def kind_of(auto: SubgoalAutomaton, u: int) -> int:
        if u == auto._accept_idx:
            return 1
        if u == auto._reject_idx:
            return 2
        return 0

    explored: dict[tuple[int, int, int], int] = {}
    prefix: list[int] = []

    def rec(ua: int, ub: int, prev: int, remaining: int) -> Optional[tuple[int, ...]]:
        key = (ua, ub, prev)
        if explored.get(key, -1) >= remaining:
            return None
        explored[key] = remaining
        for mask in sets:
            if prefix and prev == mask:
                continue
            try:
                na = a.step_index(ua, mask)
            except DeterminismViolation:
                na = _VIOLATION
            try:
                nb = b.step_index(ub, mask)
            except DeterminismViolation:
                nb = _VIOLATION
            prefix.append(mask)
            if (na == _VIOLATION) != (nb == _VIOLATION):
                return tuple(prefix)
            if na != _VIOLATION:
                if kind_of(a, na) != kind_of(b, nb):
                    return tuple(prefix)
                # identical absorbing outcomes need no further extension
                both_terminal = na >= a._accept_idx and nb >= b._accept_idx
                if remaining > 1 and not both_terminal:
                    found = rec(na, nb, mask, remaining - 1)
                    if found is not None:
                        return found
            prefix.pop()
        return None

    # the sentinel -1 never equals a first observation, so length-1 traces
    # over every set in the universe are always explored
    return rec(0, 0, -1, max_len)


def equivalent(
    a: SubgoalAutomaton,
    b: SubgoalAutomaton,
    max_len: int,
    universe: Optional[Sequence[int]] = None,
) -> bool:
    """True iff run verdicts agree on every compressed trace of length ≤ max_len."""
    return find_distinguishing_trace(a, b, max_len, universe) is None
