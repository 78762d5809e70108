"""Tabular Q-learning over subgoal automata.

One Q-table per (task, grid, automaton state) triplet; every experience
updates the tables of all non-terminal automaton states simultaneously
(intra-option updates), bootstrapping through the state each automaton
transition leads to.  Optional potential-based shaping derives potentials
from the automaton's distance to the accepting state.
"""

from __future__ import annotations

import math
import random
from typing import Hashable, Iterable, Optional

from .automaton import SubgoalAutomaton


class QBank:
    """Lazy map from (task, grid, automaton state) keys to cell-action tables.

    Tables are dense per cell: ``table[cell][action]``.  Missing entries read
    as zero, which is also what reset restores.
    """

    def __init__(self, alpha: float, gamma: float, epsilon: float,
                 n_cells: int, n_actions: int = 4):
        self.alpha = alpha
        self.gamma = gamma
        self.epsilon = epsilon
        self.n_cells = n_cells
        self.n_actions = n_actions
        self.tables: dict[Hashable, list[list[float]]] = {}

    def table(self, key: Hashable) -> list[list[float]]:
        table = self.tables.get(key)
        if table is None:
            table = self.tables[key] = [
                [0.0] * self.n_actions for _ in range(self.n_cells)
            ]
        return table

    def value(self, key: Hashable, cell: int, action: int) -> float:
        table = self.tables.get(key)
        return table[cell][action] if table is not None else 0.0

    def reset(self, key_prefix: Optional[tuple] = None) -> None:
        """Forget everything learned; subsequent reads are 0.

        With a key prefix, only tables whose key starts with it are cleared
        (used to reset one task's automaton-state tables after re-learning).
        """
        if key_prefix is None:
            self.tables.clear()
            return
        drop = [
            k for k in self.tables
            if isinstance(k, tuple) and k[: len(key_prefix)] == key_prefix
        ]
        for k in drop:
            del self.tables[k]

    def select_action(self, key: Hashable, cell: int, rng: random.Random,
                      epsilon: Optional[float] = None) -> int:
        """Epsilon-greedy with uniformly random tie-breaking on the argmax."""
        eps = self.epsilon if epsilon is None else epsilon
        if eps > 0.0 and rng.random() < eps:
            return rng.randrange(self.n_actions)
        table = self.tables.get(key)
        if table is None:
            return rng.randrange(self.n_actions)
        row = table[cell]
        best = max(row)
        ties = [a for a, v in enumerate(row) if v == best]
        if len(ties) == 1:
            return ties[0]
        return ties[rng.randrange(len(ties))]

    def snapshot(self) -> list[tuple]:
        """Nonzero entries as (key..., cell, action, value) tuples."""
        rows = []
        for key in sorted(self.tables, key=repr):
            table = self.tables[key]
            for cell, actions in enumerate(table):
                for action, value in enumerate(actions):
                    if value != 0.0:
                        entry = key if isinstance(key, tuple) else (key,)
                        rows.append((*entry, cell, action, value))
        return rows

    def dump_snapshot(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for row in self.snapshot():
                fh.write("\t".join(repr(v) for v in row) + "\n")


class ShapingPotential:
    """Automaton-state potentials Φ(u) = |U| − d(u, uA), with clamping.

    States that cannot reach the accepting state have infinite distance;
    their potential is substituted by ``clamp_value`` wherever it is used.
    """

    def __init__(self, phi: dict[str, float], clamp_value: float = -100.0):
        self.phi = dict(phi)
        self.clamp_value = clamp_value

    @classmethod
    def from_automaton(cls, automaton: SubgoalAutomaton,
                       clamp_value: float = -100.0) -> "ShapingPotential":
        size = len(automaton)
        phi = {
            state: size - dist
            for state, dist in automaton.distances_to_accepting().items()
        }
        return cls(phi, clamp_value)

    def clamped(self, state: str) -> float:
        value = self.phi[state]
        return self.clamp_value if value == -math.inf else value

    def reward(self, u: str, u_next: str, gamma: float) -> float:
        return gamma * self.clamped(u_next) - self.clamped(u)


def shaping_reward(potential: ShapingPotential, u: str, u_next: str,
                   gamma: float) -> float:
    """F(u, u') = γ·Φ(u') − Φ(u), with clamped potentials."""
    return potential.reward(u, u_next, gamma)


def update_all(
    qbank: QBank,
    key_prefix: tuple,
    automaton: SubgoalAutomaton,
    cell: int,
    action: int,
    next_cell: int,
    obs_mask: int,
    shaping: Optional[ShapingPotential] = None,
) -> None:
    """Q-learning update of every non-terminal automaton state's table.

    For each state u the transition u' = step(u, obs) defines the reward
    (1 on reaching the accepting state, else 0, plus shaping when enabled)
    and the bootstrap table; terminal successors bootstrap 0.
    """
    gamma = qbank.gamma
    alpha = qbank.alpha
    states = automaton.states
    accept = len(states) - 2
    for u in range(accept):
        u_next = automaton.step_index(u, obs_mask)
        reward = 1.0 if u_next == accept else 0.0
        if shaping is not None:
            reward += shaping.reward(states[u], states[u_next], gamma)
        if u_next >= accept:
            bootstrap = 0.0
        else:
            bootstrap = max(qbank.table((*key_prefix, states[u_next]))[next_cell])
        row = qbank.table((*key_prefix, states[u]))[cell]
        row[action] += alpha * (reward + gamma * bootstrap - row[action])
