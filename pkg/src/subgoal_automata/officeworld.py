"""The OfficeWorld gridworld: layout, dynamics, labeling, and tasks.

An agent moves in four cardinal directions over a walled grid.  Cells carry
observables (coffee, mail, office, landmarks A-D, decorations); the labeling
function reports the observables under the agent.  Entering a decoration is
a dead end; each task's goal predicate is evaluated over what the agent has
collected or visited so far.
"""

from __future__ import annotations

import enum
import importlib.resources
import random
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, NamedTuple, Optional

from .automaton import Condition, Edge, SubgoalAutomaton
from .traces import (
    Alphabet,
    ObservationTrace,
    STATUS_ALIVE,
    STATUS_DEAD_END,
    STATUS_GOAL,
    TraceLabel,
)

OBSERVABLES = ("coffee", "mail", "office", "A", "B", "C", "D", "deco")
OFFICE_ALPHABET = Alphabet(OBSERVABLES)

_CHAR_TO_SYMBOL = {
    "c": "coffee", "m": "mail", "o": "office",
    "A": "A", "B": "B", "C": "C", "D": "D", "*": "deco",
}
_SYMBOL_TO_CHAR = {v: k for k, v in _CHAR_TO_SYMBOL.items()}

#: Observables that may never share a cell with anything else.
EXCLUSIVE_OBSERVABLES = frozenset({"A", "B", "C", "D", "deco"})

ACTIONS = ("up", "down", "left", "right")
UP, DOWN, LEFT, RIGHT = range(4)
_MOVES = {UP: (0, 1), DOWN: (0, -1), LEFT: (-1, 0), RIGHT: (1, 0)}


class Task(enum.Enum):
    COFFEE = "coffee"
    COFFEE_MAIL = "coffee_mail"
    VISIT_ABCD = "visit_abcd"

    @property
    def restricted_alphabet(self) -> tuple[str, ...]:
        """The observables the task actually needs."""
        if self is Task.COFFEE:
            return ("coffee", "office", "deco")
        if self is Task.COFFEE_MAIL:
            return ("coffee", "mail", "office", "deco")
        return ("A", "B", "C", "D", "deco")


class SteppingTerminal(Exception):
    """env_step was called on a state that already reached goal or dead end."""


class EnvState(NamedTuple):
    """Environment state: agent cell index plus task progress flags."""

    cell: int
    carried: int          # bit 0 = coffee, bit 1 = mail
    progress: int         # next landmark index for VisitABCD (0..4)
    status: str           # one of alive/goal/dead_end

    def agent_cell(self, layout: "GridLayout") -> tuple[int, int]:
        return self.cell % layout.width, self.cell // layout.width

    @property
    def carried_items(self) -> frozenset[str]:
        items = []
        if self.carried & 1:
            items.append("coffee")
        if self.carried & 2:
            items.append("mail")
        return frozenset(items)


@dataclass(frozen=True)
class GridLayout:
    """Grid dimensions, wall segments between adjacent cells, and placements."""

    width: int
    height: int
    start: tuple[int, int]
    placements: dict[str, frozenset[tuple[int, int]]]
    walls: frozenset[tuple[tuple[int, int], tuple[int, int]]]

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must have positive dimensions")
        object.__setattr__(self, "placements", dict(self.placements))
        norm = set()
        for a, b in self.walls:
            if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
                raise ValueError(f"wall {a}-{b} must separate adjacent cells")
            self._check_bounds(a)
            self._check_bounds(b)
            norm.add((min(a, b), max(a, b)))
        object.__setattr__(self, "walls", frozenset(norm))
        self._check_bounds(self.start)
        by_cell: dict[tuple[int, int], set[str]] = {}
        for symbol, cells in self.placements.items():
            if symbol not in OBSERVABLES:
                raise ValueError(f"unknown observable {symbol!r}")
            for cell in cells:
                self._check_bounds(cell)
                by_cell.setdefault(cell, set()).add(symbol)
        for cell, symbols in by_cell.items():
            if len(symbols) > 1 and symbols & EXCLUSIVE_OBSERVABLES:
                raise ValueError(
                    f"cell {cell} mixes exclusive observables with others: {symbols}"
                )

    def _check_bounds(self, cell: tuple[int, int]) -> None:
        x, y = cell
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise ValueError(f"cell {cell} outside {self.width}x{self.height} grid")

    def symbols_at(self, cell: tuple[int, int]) -> frozenset[str]:
        return frozenset(s for s, cells in self.placements.items() if cell in cells)

    def blocked(self, a: tuple[int, int], b: tuple[int, int]) -> bool:
        return (min(a, b), max(a, b)) in self.walls

    # -- map format ---------------------------------------------------------

    @classmethod
    def from_map_text(cls, text: str) -> "GridLayout":
        rows: list[str] = []
        walls = set()
        wall_re = re.compile(r"wall:\s*\((\d+),(\d+)\)-\((\d+),(\d+)\)")
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("wall:"):
                m = wall_re.match(line)
                if not m:
                    raise ValueError(f"malformed wall line: {line!r}")
                x1, y1, x2, y2 = map(int, m.groups())
                walls.add(((x1, y1), (x2, y2)))
            else:
                rows.append(line)
        if not rows:
            raise ValueError("map has no grid rows")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ValueError("grid rows must all have the same width")
        height = len(rows)
        start: Optional[tuple[int, int]] = None
        placements: dict[str, set[tuple[int, int]]] = {}
        for i, row in enumerate(rows):
            y = height - 1 - i  # top row first in the file
            for x, ch in enumerate(row):
                if ch == ".":
                    continue
                if ch == "S":
                    if start is not None:
                        raise ValueError("multiple start cells")
                    start = (x, y)
                    continue
                symbol = _CHAR_TO_SYMBOL.get(ch)
                if symbol is None:
                    raise ValueError(f"unknown map character {ch!r} at ({x},{y})")
                placements.setdefault(symbol, set()).add((x, y))
        if start is None:
            raise ValueError("map has no start cell 'S'")
        return cls(width, height, start,
                   {s: frozenset(c) for s, c in placements.items()}, frozenset(walls))

    def to_map_text(self) -> str:
        grid = [["."] * self.width for _ in range(self.height)]
        for symbol, cells in self.placements.items():
            for x, y in cells:
                grid[y][x] = _SYMBOL_TO_CHAR[symbol]
        sx, sy = self.start
        grid[sy][sx] = "S"
        lines = ["".join(grid[y]) for y in range(self.height - 1, -1, -1)]
        for a, b in sorted(self.walls):
            lines.append(f"wall: ({a[0]},{a[1]})-({b[0]},{b[1]})")
        return "\n".join(lines) + "\n"


@lru_cache(maxsize=1)
def default_layout() -> GridLayout:
    """The checked-in 12x9 office grid."""
    text = (
        importlib.resources.files("subgoal_automata")
        .joinpath("maps/default_office.map")
        .read_text(encoding="utf-8")
    )
    return GridLayout.from_map_text(text)


def _tasks_reachable(layout: GridLayout) -> bool:
    """Start and every non-decoration observable in one decoration-free component.

    Decorations are dead ends, and room doorways are single cells, so random
    placements can seal off whole regions; a grid whose coffee (say) can only
    be reached across a decoration makes its tasks unsolvable.
    """
    deco = layout.placements.get("deco", frozenset())
    targets = {
        cell
        for symbol, cells in layout.placements.items()
        if symbol != "deco"
        for cell in cells
    }
    seen = {layout.start}
    frontier = [layout.start]
    while frontier:
        x, y = frontier.pop()
        for nx, ny in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if not (0 <= nx < layout.width and 0 <= ny < layout.height):
                continue
            cell = (nx, ny)
            if cell in seen or cell in deco or layout.blocked((x, y), cell):
                continue
            seen.add(cell)
            frontier.append(cell)
    return targets <= seen


def random_grid(base_layout: GridLayout, seed: int | random.Random) -> GridLayout:
    """Re-sample observable and start cells uniformly onto distinct cells.

    Walls and dimensions are copied from the base layout; the multiplicity of
    each observable is preserved.  Placing everything on distinct cells keeps
    every labeling either empty or a singleton.  Draws are rejected until the
    start and all non-decoration observables are mutually reachable without
    crossing a decoration, so each task is actually solvable on every grid.
    """
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    slots: list[str] = []
    for symbol in OBSERVABLES:  # fixed draw order for determinism
        slots.extend([symbol] * len(base_layout.placements.get(symbol, ())))
    cells = [(x, y) for y in range(base_layout.height) for x in range(base_layout.width)]
    while True:
        drawn = rng.sample(cells, len(slots) + 1)
        placements: dict[str, set[tuple[int, int]]] = {}
        for symbol, cell in zip(slots, drawn[:-1]):
            placements.setdefault(symbol, set()).add(cell)
        layout = GridLayout(
            base_layout.width,
            base_layout.height,
            drawn[-1],
            {s: frozenset(c) for s, c in placements.items()},
            base_layout.walls,
        )
        if _tasks_reachable(layout):
            return layout


class OfficeEnv:
    """Deterministic episodic environment for one (layout, task) pair.

    Movement, labeling and goal bookkeeping are precompiled into flat tables
    indexed by cell, so stepping is cheap inside training loops.
    """

    def __init__(self, layout: GridLayout, task: Task):
        self.layout = layout
        self.task = task
        w, h = layout.width, layout.height
        self.n_cells = w * h
        self.label_masks = [0] * self.n_cells
        for symbol, cells in layout.placements.items():
            bit = OFFICE_ALPHABET.bit(symbol)
            for x, y in cells:
                self.label_masks[x + y * w] |= bit
        self.move_table = [0] * (self.n_cells * 4)
        for y in range(h):
            for x in range(w):
                idx = x + y * w
                for action, (dx, dy) in _MOVES.items():
                    nx, ny = x + dx, y + dy
                    if (
                        0 <= nx < w and 0 <= ny < h
                        and not layout.blocked((x, y), (nx, ny))
                    ):
                        self.move_table[idx * 4 + action] = nx + ny * w
                    else:
                        self.move_table[idx * 4 + action] = idx
        self._start_idx = layout.start[0] + layout.start[1] * w
        self._coffee_bit = OFFICE_ALPHABET.bit("coffee")
        self._mail_bit = OFFICE_ALPHABET.bit("mail")
        self._office_bit = OFFICE_ALPHABET.bit("office")
        self._deco_bit = OFFICE_ALPHABET.bit("deco")
        self._landmark_bits = tuple(OFFICE_ALPHABET.bit(s) for s in "ABCD")

    def _enter(self, cell: int, carried: int, progress: int) -> EnvState:
        """Apply cell-entry effects: pickups, landmark progress, goal, dead end."""
        mask = self.label_masks[cell]
        if mask & self._deco_bit:
            return EnvState(cell, carried, progress, STATUS_DEAD_END)
        if mask & self._coffee_bit:
            carried |= 1
        if mask & self._mail_bit:
            carried |= 2
        task = self.task
        if task is Task.VISIT_ABCD:
            if progress < 4 and mask & self._landmark_bits[progress]:
                progress += 1
            if progress == 4:
                return EnvState(cell, carried, progress, STATUS_GOAL)
        elif mask & self._office_bit:
            need = 1 if task is Task.COFFEE else 3
            if carried & need == need:
                return EnvState(cell, carried, progress, STATUS_GOAL)
        return EnvState(cell, carried, progress, STATUS_ALIVE)

    def reset(self, rng: Optional[random.Random] = None) -> EnvState:
        """Initial state; cell-entry effects (pickups, dead end, goal) apply.

        Without an rng the agent is placed at the layout's start cell.  With
        one, the start is drawn uniformly over all cells (exploring starts,
        used by training episodes); picking up an item or stepping into a
        dead end at reset behaves exactly like entering that cell.
        """
        if rng is None:
            return self._enter(self._start_idx, 0, 0)
        return self._enter(rng.randrange(self.n_cells), 0, 0)

    def env_step(self, state: EnvState, action: int) -> tuple[EnvState, float]:
        """Deterministic move (blocked moves keep the position); reward 1 on goal."""
        if state.status != STATUS_ALIVE:
            raise SteppingTerminal(f"episode already ended with status {state.status}")
        cell = self.move_table[state.cell * 4 + action]
        new = self._enter(cell, state.carried, state.progress)
        return new, 1.0 if new.status == STATUS_GOAL else 0.0

    # kept as a method so callers can treat the env as the labeling function
    def label_mask(self, state: EnvState) -> int:
        return self.label_masks[state.cell]

    def labeling(self, state: EnvState) -> frozenset[str]:
        """Observables at the agent's cell."""
        return OFFICE_ALPHABET.decode(self.label_masks[state.cell])

    def observation_trace(
        self, actions: Iterable[int], restrict: Optional[Iterable[str]] = None
    ) -> tuple[ObservationTrace, EnvState, list[float]]:
        """Replay an action sequence from reset into a labeled observation trace."""
        restrict_mask = (
            OFFICE_ALPHABET.full_mask if restrict is None
            else OFFICE_ALPHABET.restrict_mask(restrict)
        )
        state = self.reset()
        steps = [self.label_mask(state) & restrict_mask]
        rewards = []
        for action in actions:
            state, reward = self.env_step(state, action)
            steps.append(self.label_mask(state) & restrict_mask)
            rewards.append(reward)
        label = TraceLabel.from_token(
            {"goal": "+", "dead_end": "-", "alive": "I"}[state.status]
        )
        return ObservationTrace(OFFICE_ALPHABET, tuple(steps), label), state, rewards


def observation_universe(
    layout: GridLayout,
    restrict: Optional[Iterable[str]] = None,
    alphabet: Optional[Alphabet] = None,
) -> tuple[int, ...]:
    """Observation-set masks realizable in a layout (restricted alphabet).

    The empty set is always realizable; the rest are the labels of the
    layout's cells.  With non-overlapping placements this is the empty set
    plus singletons.  Masks are encoded in ``alphabet`` (default: the full
    office alphabet).
    """
    restrict_set = set(OBSERVABLES if restrict is None else restrict)
    target = alphabet or OFFICE_ALPHABET
    masks = {0}
    for cell_symbols in (
        layout.symbols_at(cell) for cells in layout.placements.values() for cell in cells
    ):
        masks.add(target.encode(s for s in cell_symbols if s in restrict_set))
    return tuple(sorted(masks))


# --- ground-truth automata --------------------------------------------------


def _cond(pos: Iterable[str] = (), neg: Iterable[str] = ()) -> Condition:
    return Condition(frozenset(pos), frozenset(neg))


def coffee_automaton(alphabet: Optional[Alphabet] = None) -> SubgoalAutomaton:
    """Deliver coffee to the office; decorations reject."""
    return SubgoalAutomaton(
        ["u0", "u1", "uA", "uR"],
        alphabet or OFFICE_ALPHABET,
        [
            Edge("u0", "u1", (_cond(["coffee"], ["office"]),)),
            Edge("u0", "uA", (_cond(["coffee", "office"]),)),
            Edge("u0", "uR", (_cond(["deco"]),)),
            Edge("u1", "uA", (_cond(["office"]),)),
            Edge("u1", "uR", (_cond(["deco"]),)),
        ],
    )


def coffee_mail_automaton(alphabet: Optional[Alphabet] = None) -> SubgoalAutomaton:
    """Deliver both coffee and mail to the office; decorations reject."""
    return SubgoalAutomaton(
        ["u0", "u1", "u2", "u3", "uA", "uR"],
        alphabet or OFFICE_ALPHABET,
        [
            Edge("u0", "u1", (_cond(["coffee"], ["mail"]),)),
            Edge("u0", "u2", (_cond(["mail"], ["coffee"]),)),
            Edge("u0", "u3", (_cond(["coffee", "mail"], ["office"]),)),
            Edge("u0", "uA", (_cond(["coffee", "mail", "office"]),)),
            Edge("u0", "uR", (_cond(["deco"]),)),
            Edge("u1", "u3", (_cond(["mail"], ["office"]),)),
            Edge("u1", "uA", (_cond(["mail", "office"]),)),
            Edge("u1", "uR", (_cond(["deco"]),)),
            Edge("u2", "u3", (_cond(["coffee"], ["office"]),)),
            Edge("u2", "uA", (_cond(["coffee", "office"]),)),
            Edge("u2", "uR", (_cond(["deco"]),)),
            Edge("u3", "uA", (_cond(["office"]),)),
            Edge("u3", "uR", (_cond(["deco"]),)),
        ],
    )


def visit_abcd_automaton(alphabet: Optional[Alphabet] = None) -> SubgoalAutomaton:
    """Visit A, B, C and D in order; decorations reject."""
    return SubgoalAutomaton(
        ["u0", "u1", "u2", "u3", "uA", "uR"],
        alphabet or OFFICE_ALPHABET,
        [
            Edge("u0", "u1", (_cond(["A"]),)),
            Edge("u0", "uR", (_cond(["deco"]),)),
            Edge("u1", "u2", (_cond(["B"]),)),
            Edge("u1", "uR", (_cond(["deco"]),)),
            Edge("u2", "u3", (_cond(["C"]),)),
            Edge("u2", "uR", (_cond(["deco"]),)),
            Edge("u3", "uA", (_cond(["D"]),)),
            Edge("u3", "uR", (_cond(["deco"]),)),
        ],
    )


def ground_truth_automaton(task: Task, alphabet: Optional[Alphabet] = None) -> SubgoalAutomaton:
    if task is Task.COFFEE:
        return coffee_automaton(alphabet)
    if task is Task.COFFEE_MAIL:
        return coffee_mail_automaton(alphabet)
    return visit_abcd_automaton(alphabet)


def render_ascii(layout: GridLayout, state: Optional[EnvState] = None) -> str:
    """Human-oriented picture of the grid with walls drawn between cells."""
    w, h = layout.width, layout.height
    cell_char = {}
    for symbol, cells in layout.placements.items():
        for c in cells:
            cell_char[c] = _SYMBOL_TO_CHAR[symbol]
    agent = None
    if state is not None:
        agent = (state.cell % w, state.cell // w)
    lines = []
    for y in range(h - 1, -1, -1):
        row = []
        for x in range(w):
            ch = cell_char.get((x, y), ".")
            if (x, y) == layout.start:
                ch = "S" if (x, y) not in cell_char else ch
            if agent == (x, y):
                ch = "@"
            row.append(ch)
            row.append("|" if layout.blocked((x, y), (x + 1, y)) else " ")
        lines.append(" " + "".join(row))
        if y > 0:
            sep = []
            for x in range(w):
                sep.append("--" if layout.blocked((x, y), (x, y - 1)) else "  ")
            lines.append(" " + "".join(sep))
    return "\n".join(lines)
