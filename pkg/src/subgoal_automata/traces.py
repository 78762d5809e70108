"""Observation alphabets, labeled observation traces, and trace compression.

Observables are interned to bit positions of an :class:`Alphabet`, so an
observation set is a plain int bitmask and trace comparisons are integer
comparisons.  The human-readable side (frozensets of symbol strings) is kept
at the API boundary only.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence


class TraceLabel(enum.Enum):
    """Outcome class of an episode trace."""

    POSITIVE = "+"
    NEGATIVE = "-"
    INCOMPLETE = "I"

    @classmethod
    def from_token(cls, token: str) -> "TraceLabel":
        for label in cls:
            if label.value == token:
                return label
        raise ValueError(f"unknown trace label token {token!r}")


#: Terminal status of an environment state, as reported by an episode.
STATUS_GOAL = "goal"
STATUS_DEAD_END = "dead_end"
STATUS_ALIVE = "alive"


def label_from_outcome(status: str) -> TraceLabel:
    """Map the episode's final environment status to a trace label."""
    if status == STATUS_GOAL:
        return TraceLabel.POSITIVE
    if status == STATUS_DEAD_END:
        return TraceLabel.NEGATIVE
    if status == STATUS_ALIVE:
        return TraceLabel.INCOMPLETE
    raise ValueError(f"unknown environment status {status!r}")


class Alphabet:
    """An ordered set of observable symbols with bitmask encoding."""

    __slots__ = ("symbols", "_index", "full_mask")

    def __init__(self, symbols: Iterable[str]):
        syms = tuple(symbols)
        if not syms:
            raise ValueError("alphabet must contain at least one observable")
        if len(set(syms)) != len(syms):
            raise ValueError(f"duplicate observables in alphabet: {syms}")
        for s in syms:
            if not s or not isinstance(s, str):
                raise ValueError(f"observable symbols must be nonempty strings, got {s!r}")
        self.symbols = syms
        self._index = {s: i for i, s in enumerate(syms)}
        self.full_mask = (1 << len(syms)) - 1

    def __len__(self) -> int:
        return len(self.symbols)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Alphabet) and self.symbols == other.symbols

    def __hash__(self) -> int:
        return hash(self.symbols)

    def __repr__(self) -> str:
        return f"Alphabet({', '.join(self.symbols)})"

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._index

    def index(self, symbol: str) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise ValueError(f"observable {symbol!r} not in alphabet {self.symbols}") from None

    def bit(self, symbol: str) -> int:
        return 1 << self.index(symbol)

    def encode(self, symbols: Iterable[str]) -> int:
        mask = 0
        for s in symbols:
            mask |= self.bit(s)
        return mask

    def decode(self, mask: int) -> frozenset[str]:
        if mask & ~self.full_mask:
            raise ValueError(f"mask {mask:#x} has bits outside alphabet {self.symbols}")
        return frozenset(s for i, s in enumerate(self.symbols) if mask >> i & 1)

    def restrict_mask(self, symbols: Iterable[str]) -> int:
        """Bitmask selecting a sub-alphabet, for masking observations."""
        return self.encode(symbols)

    def format_set(self, mask: int) -> str:
        return "{" + ",".join(s for i, s in enumerate(self.symbols) if mask >> i & 1) + "}"


@dataclass(frozen=True)
class ObservationTrace:
    """A labeled sequence of observation sets (one per visited MDP state)."""

    alphabet: Alphabet
    steps: tuple[int, ...]
    label: TraceLabel

    def __post_init__(self):
        if len(self.steps) < 1:
            raise ValueError("a trace observes at least the initial state")
        for mask in self.steps:
            if mask & ~self.alphabet.full_mask:
                raise ValueError("observation set outside the trace alphabet")

    @classmethod
    def from_sets(
        cls,
        alphabet: Alphabet,
        sets: Sequence[Iterable[str]],
        label: TraceLabel | str,
    ) -> "ObservationTrace":
        if isinstance(label, str):
            label = TraceLabel.from_token(label)
        return cls(alphabet, tuple(alphabet.encode(s) for s in sets), label)

    def symbol_sets(self) -> tuple[frozenset[str], ...]:
        return tuple(self.alphabet.decode(m) for m in self.steps)

    def __len__(self) -> int:
        return len(self.steps)

    def __repr__(self) -> str:
        sets = "; ".join(self.alphabet.format_set(m) for m in self.steps)
        return f"<{self.label.value} {sets}>"


def compress_steps(steps: Sequence[int]) -> tuple[int, ...]:
    """Collapse contiguous duplicate observation sets, preserving order."""
    out = [steps[0]]
    for mask in steps[1:]:
        if mask != out[-1]:
            out.append(mask)
    return tuple(out)


def compress(trace: ObservationTrace) -> ObservationTrace:
    """Compressed form of a trace; idempotent, label unchanged."""
    return ObservationTrace(trace.alphabet, compress_steps(trace.steps), trace.label)


def is_compressed(trace: ObservationTrace) -> bool:
    return all(a != b for a, b in zip(trace.steps, trace.steps[1:]))


def enumerate_compressed_steps(
    universe: Sequence[int], max_len: int
) -> Iterator[tuple[int, ...]]:
    """All compressed step sequences of length 1..max_len over a set universe.

    ``universe`` is the collection of observation-set masks a trace may draw
    from; consecutive equal sets are excluded by construction.  Deterministic
    order: by length, then lexicographically over the sorted universe.
    """
    sets = sorted(set(universe))
    prefix: list[int] = []

    def rec(length: int) -> Iterator[tuple[int, ...]]:
        for mask in sets:
            if prefix and prefix[-1] == mask:
                continue
            prefix.append(mask)
            yield tuple(prefix)
            if length + 1 < max_len:
                yield from rec(length + 1)
            prefix.pop()

    if max_len >= 1:
        yield from rec(0)


# --- trace file format ------------------------------------------------------
#
# One trace per line:  LABEL; {sym,sym}; {}; {sym}
# LABEL is one of + - I and {} denotes the empty observation set.


def _parse_set(text: str, alphabet: Alphabet, lineno: int) -> int:
    text = text.strip()
    if not (text.startswith("{") and text.endswith("}")):
        raise ValueError(f"line {lineno}: malformed observation set {text!r}")
    inner = text[1:-1].strip()
    if not inner:
        return 0
    try:
        return alphabet.encode(s.strip() for s in inner.split(","))
    except ValueError as exc:
        raise ValueError(f"line {lineno}: {exc}") from None


def parse_trace_line(line: str, alphabet: Alphabet, lineno: int = 0) -> ObservationTrace:
    parts = line.split(";")
    if len(parts) < 2:
        raise ValueError(f"line {lineno}: expected 'LABEL; {{...}}; ...', got {line!r}")
    label = TraceLabel.from_token(parts[0].strip())
    steps = tuple(_parse_set(p, alphabet, lineno) for p in parts[1:])
    return ObservationTrace(alphabet, steps, label)


def format_trace_line(trace: ObservationTrace) -> str:
    sets = "; ".join(trace.alphabet.format_set(m) for m in trace.steps)
    return f"{trace.label.value}; {sets}"


def load_traces(path: str, alphabet: Alphabet) -> list[ObservationTrace]:
    traces = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            traces.append(parse_trace_line(line, alphabet, lineno))
    return traces


def save_traces(path: str, traces: Iterable[ObservationTrace]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for trace in traces:
            fh.write(format_trace_line(trace) + "\n")
