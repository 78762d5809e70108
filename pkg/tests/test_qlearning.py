import math
import random

import numpy as np
import pytest

from subgoal_automata.automaton import Condition, Edge, SubgoalAutomaton
from subgoal_automata.officeworld import coffee_automaton
from subgoal_automata.qlearning import QBank, ShapingPotential, shaping_reward, update_all
from subgoal_automata.traces import Alphabet

COFFEE = coffee_automaton()
ALPHA = COFFEE.alphabet


def chain_automaton():
    """Three states over a single 'goal' observable; uR unreachable."""
    alpha = Alphabet(["goal"])
    return SubgoalAutomaton(
        ["u0", "uA", "uR"], alpha,
        [Edge("u0", "uA", (Condition(frozenset({"goal"}), frozenset()),))],
    )


class TestSelectAction:
    def test_all_zero_table_uniform_tiebreak(self):
        qbank = QBank(0.1, 0.99, 0.0, n_cells=4)
        rng = random.Random(1)
        counts = [0] * 4
        for _ in range(20_000):
            counts[qbank.select_action("k", 0, rng)] += 1
        for c in counts:
            assert abs(c / 20_000 - 0.25) < 0.02

    def test_unique_argmax(self):
        qbank = QBank(0.1, 0.99, 0.0, n_cells=2)
        qbank.table("k")[1][0] = 0.7
        rng = random.Random(2)
        assert all(qbank.select_action("k", 1, rng) == 0 for _ in range(20))

    def test_epsilon_one_uniform(self):
        qbank = QBank(0.1, 0.99, 1.0, n_cells=1)
        qbank.table("k")[0][2] = 5.0  # ignored under pure exploration
        rng = random.Random(3)
        counts = [0] * 4
        for _ in range(10_000):
            counts[qbank.select_action("k", 0, rng)] += 1
        for c in counts:
            assert abs(c / 10_000 - 0.25) < 0.02

    def test_epsilon_override(self):
        qbank = QBank(0.1, 0.99, 1.0, n_cells=1)
        qbank.table("k")[0][3] = 1.0
        rng = random.Random(4)
        assert all(qbank.select_action("k", 0, rng, epsilon=0.0) == 3 for _ in range(10))


class TestShaping:
    def test_coffee_potentials(self):
        pot = ShapingPotential.from_automaton(COFFEE)
        assert pot.phi["uA"] == 4.0
        assert pot.phi["u0"] == 3.0
        assert pot.phi["u1"] == 3.0
        assert pot.phi["uR"] == -math.inf
        assert pot.clamped("uR") == -100.0

    def test_reward_values(self):
        pot = ShapingPotential.from_automaton(COFFEE)
        assert shaping_reward(pot, "u0", "uA", 0.99) == pytest.approx(0.99 * 4 - 3)
        assert shaping_reward(pot, "u0", "u1", 0.99) == pytest.approx(0.99 * 3 - 3)
        assert shaping_reward(pot, "u0", "uR", 0.99) == pytest.approx(-102.0)

    def test_telescoping_identity(self):
        rng = random.Random(6)
        pot = ShapingPotential.from_automaton(COFFEE)
        finite = [s for s in COFFEE.states if pot.phi[s] != -math.inf]
        for _ in range(500):
            gamma = rng.uniform(0.5, 0.999)
            path = [rng.choice(finite) for _ in range(rng.randint(2, 12))]
            total = sum(
                gamma ** i * pot.reward(path[i], path[i + 1], gamma)
                for i in range(len(path) - 1)
            )
            expected = gamma ** (len(path) - 1) * pot.phi[path[-1]] - pot.phi[path[0]]
            assert abs(total - expected) < 1e-9


class TestUpdateAll:
    def test_reaching_accept_writes_reward(self):
        qbank = QBank(0.1, 0.99, 0.1, n_cells=3)
        auto = chain_automaton()
        obs = auto.alphabet.encode({"goal"})
        update_all(qbank, ("t", 0), auto, 0, 1, 2, obs)
        assert qbank.table(("t", 0, "u0"))[0][1] == pytest.approx(0.1)

    def test_nonterminal_zero_bootstrap_stays_zero(self):
        qbank = QBank(0.1, 0.99, 0.1, n_cells=3)
        auto = chain_automaton()
        update_all(qbank, ("t", 0), auto, 0, 1, 2, 0)
        assert qbank.table(("t", 0, "u0"))[0][1] == 0.0

    def test_all_nonterminal_states_updated(self):
        qbank = QBank(0.5, 0.9, 0.1, n_cells=3)
        obs = ALPHA.encode({"coffee"})
        qbank.table(("t", 0, "u1"))[2][0] = 1.0  # bootstrap source at next cell
        update_all(qbank, ("t", 0), COFFEE, 0, 1, 2, obs)
        # u0 transitions to u1 and bootstraps from u1's table
        assert qbank.table(("t", 0, "u0"))[0][1] == pytest.approx(0.5 * 0.9 * 1.0)
        # u1 self-loops and bootstraps from its own table
        assert qbank.table(("t", 0, "u1"))[0][1] == pytest.approx(0.5 * 0.9 * 1.0)

    def test_touches_only_nonterminal_tables(self):
        qbank = QBank(0.1, 0.99, 0.1, n_cells=2)
        update_all(qbank, ("t", 7), COFFEE, 0, 0, 1, ALPHA.encode({"office"}))
        keys = set(qbank.tables)
        assert keys == {("t", 7, "u0"), ("t", 7, "u1")}

    def test_shaped_update(self):
        qbank = QBank(1.0, 0.99, 0.1, n_cells=2)
        pot = ShapingPotential.from_automaton(COFFEE)
        obs = ALPHA.encode({"deco"})
        update_all(qbank, ("t", 0), COFFEE, 0, 0, 1, obs, shaping=pot)
        # u0 -> uR: r = 0 + F(u0, uR) = -102, terminal bootstrap 0
        assert qbank.table(("t", 0, "u0"))[0][0] == pytest.approx(-102.0)


class TestReset:
    def test_reset_clears_everything(self):
        qbank = QBank(0.1, 0.99, 0.1, n_cells=2)
        qbank.table(("a", 0, "u0"))[0][0] = 3.0
        qbank.reset()
        assert qbank.value(("a", 0, "u0"), 0, 0) == 0.0

    def test_reset_idempotent(self):
        qbank = QBank(0.1, 0.99, 0.1, n_cells=2)
        qbank.table("k")[0][0] = 1.0
        qbank.reset()
        qbank.reset()
        assert qbank.value("k", 0, 0) == 0.0

    def test_prefix_reset_keeps_other_tasks(self):
        qbank = QBank(0.1, 0.99, 0.1, n_cells=2)
        qbank.table(("a", 0, "u0"))[0][0] = 3.0
        qbank.table(("b", 0, "u0"))[0][0] = 4.0
        qbank.reset(("a",))
        assert qbank.value(("a", 0, "u0"), 0, 0) == 0.0
        assert qbank.value(("b", 0, "u0"), 0, 0) == 4.0

    def test_select_after_reset_uniform(self):
        qbank = QBank(0.1, 0.99, 0.0, n_cells=1)
        qbank.table("k")[0][1] = 9.0
        qbank.reset()
        rng = random.Random(8)
        seen = {qbank.select_action("k", 0, rng) for _ in range(200)}
        assert seen == {0, 1, 2, 3}


class TestSnapshot:
    def test_snapshot_roundtrip(self, tmp_path):
        qbank = QBank(0.1, 0.99, 0.1, n_cells=2)
        qbank.table(("t", 0, "u0"))[1][2] = 0.5
        rows = qbank.snapshot()
        assert rows == [("t", 0, "u0", 1, 2, 0.5)]
        path = tmp_path / "snap.tsv"
        qbank.dump_snapshot(str(path))
        assert "0.5" in path.read_text()


def value_iteration_chain(shaping: bool, gamma=0.99, tol=1e-12):
    """Exact optimal Q for the 3-cell chain product MDP, as a reference.

    Cells 0..2, actions left/right; the goal observable sits on cell 2;
    automaton states u0 (seeking) and uA (done).  Episodes end at uA.
    """
    auto = chain_automaton()
    pot = ShapingPotential.from_automaton(auto)
    n_cells, n_actions = 3, 2
    q = np.zeros((n_cells, n_actions))

    def step(cell, action):
        nxt = max(0, cell - 1) if action == 0 else min(n_cells - 1, cell + 1)
        done = nxt == 2  # goal observable fires u0 -> uA
        reward = 1.0 if done else 0.0
        if shaping:
            reward += pot.reward("u0", "uA" if done else "u0", gamma)
        return nxt, reward, done

    while True:
        new = np.zeros_like(q)
        for cell in range(n_cells):
            for action in range(n_actions):
                nxt, reward, done = step(cell, action)
                new[cell, action] = reward + (0.0 if done else gamma * q[nxt].max())
        if np.abs(new - q).max() < tol:
            return new
        q = new


class TestShapingPreservesPolicy:
    def test_chain_product_mdp_greedy_policies_match(self):
        plain = value_iteration_chain(shaping=False)
        shaped = value_iteration_chain(shaping=True)
        for cell in range(2):  # cell 2 is terminal
            assert set(np.flatnonzero(plain[cell] == plain[cell].max())) == \
                set(np.flatnonzero(shaped[cell] == shaped[cell].max()))

    def test_q_learning_matches_value_iteration_policy(self):
        auto = chain_automaton()
        goal_mask = auto.alphabet.encode({"goal"})
        reference = value_iteration_chain(shaping=False)
        for shaping in (False, True):
            qbank = QBank(0.2, 0.99, 0.2, n_cells=3, n_actions=2)
            pot = ShapingPotential.from_automaton(auto) if shaping else None
            rng = random.Random(17)
            for _ in range(3000):
                cell = rng.randrange(2)
                for _ in range(20):
                    action = qbank.select_action(("t", 0, "u0"), cell, rng)
                    nxt = max(0, cell - 1) if action == 0 else min(2, cell + 1)
                    obs = goal_mask if nxt == 2 else 0
                    update_all(qbank, ("t", 0), auto, cell, action, nxt, obs, pot)
                    cell = nxt
                    if cell == 2:
                        break
            table = qbank.table(("t", 0, "u0"))
            for cell in range(2):
                learned = max(range(2), key=lambda a: table[cell][a])
                assert reference[cell].argmax() == learned
