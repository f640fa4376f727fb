import math
import random

import numpy as np
import pytest

from deskzero.games import apply_action, get_game, initial_state, legal_actions
from deskzero.solver import (
    PROVEN_DRAW,
    PROVEN_LOSS,
    PROVEN_WIN,
    SolverNode,
    _one_iteration,
    make_reference_opponent,
    root_proven_value,
    solver_search,
)

from .oracles import minimax_value, optimal_actions


def solve_tree(state, iterations, seed=0):
    """Run the solver and hand back the root node for inspection."""
    game = get_game(state.game_id)
    root = SolverNode(state)
    rng = random.Random(seed)
    for _ in range(iterations):
        if root.proven is not None:
            break
        _one_iteration(root, game, math.sqrt(2.0), rng)
    return root


def random_position(game_id, depth_range, rng):
    state = initial_state(game_id)
    depth = int(rng.integers(*depth_range))
    for _ in range(depth):
        if state.is_terminal():
            break
        actions = legal_actions(state)
        state = apply_action(state, actions[rng.integers(len(actions))])
    return state


class TestProving:
    def test_immediate_win_found_and_proven(self):
        s = initial_state("tictactoe")
        for a in (0, 3, 1, 4):  # X to move, two in a row, 2 wins
            s = apply_action(s, a)
        root = solve_tree(s, 50)
        assert root.proven == PROVEN_WIN
        assert solver_search(s, 50, rng=np.random.default_rng(0)) == 2

    def test_single_legal_action(self):
        s = initial_state("tictactoe")
        for a in (0, 2, 1, 3, 5, 4, 6, 7):
            s = apply_action(s, a)
        assert legal_actions(s) == [8]
        for iterations in (1, 7, 500):
            assert solver_search(s, iterations, rng=np.random.default_rng(1)) == 8

    def test_tictactoe_root_proven_draw(self):
        value = root_proven_value(
            initial_state("tictactoe"), 100_000, rng=np.random.default_rng(2)
        )
        assert value == PROVEN_DRAW

    def test_proven_values_never_change(self):
        s = initial_state("tictactoe")
        for a in (0, 3, 1, 4):
            s = apply_action(s, a)
        game = get_game("tictactoe")
        root = SolverNode(s)
        rng = random.Random(3)
        seen = []
        for _ in range(200):
            _one_iteration(root, game, math.sqrt(2.0), rng)
            if root.proven is not None:
                seen.append(root.proven)
        assert seen and len(set(seen)) == 1

    def test_proving_rule_invariants_hold_across_tree(self):
        s = initial_state("tictactoe")
        for a in (4, 0):
            s = apply_action(s, a)
        root = solve_tree(s, 60_000)
        assert root.proven is not None

        def check(node):
            if node.children is None:
                return
            child_labels = [c.proven for c in node.children]
            if node.proven == PROVEN_WIN and not node.state.is_terminal():
                assert PROVEN_LOSS in child_labels
            if node.proven == PROVEN_LOSS and not node.state.is_terminal():
                assert all(label == PROVEN_WIN for label in child_labels)
            if node.proven == PROVEN_DRAW and not node.state.is_terminal():
                assert all(label is not None for label in child_labels)
                assert PROVEN_LOSS not in child_labels
                assert PROVEN_DRAW in child_labels
            for child in node.children:
                check(child)

        check(root)

    def test_soundness_against_minimax_oracle(self):
        memo = {}
        rng = np.random.default_rng(4)
        checked = 0
        for _ in range(1000):
            s = random_position("tictactoe", (2, 8), rng)
            if s.is_terminal():
                continue
            proven = root_proven_value(s, 4000, rng=rng)
            if proven is not None:
                checked += 1
                assert proven == minimax_value(s, memo), s.board
        assert checked > 500  # most sampled positions should resolve


class TestMoveChoice:
    def test_never_loses_short_probe_vs_random(self):
        game = get_game("tictactoe")
        rng = np.random.default_rng(5)
        losses = 0
        for i in range(10):
            solver_first = i % 2 == 0
            s = game.initial_state()
            while not s.is_terminal():
                if (s.to_move == 1) == solver_first:
                    a = solver_search(s, 100_000, rng=rng)
                else:
                    acts = legal_actions(s)
                    a = acts[rng.integers(len(acts))]
                s = apply_action(s, a)
            outcome = s.outcome.for_player(1 if solver_first else 2)
            losses += outcome < 0
        assert losses == 0

    def test_avoids_proven_losing_move(self):
        s = initial_state("tictactoe")
        for a in (0, 4, 1):  # X holds 0,1 and threatens 2; O to move
            s = apply_action(s, a)
        assert set(optimal_actions(s)) == {2}  # every other reply loses
        move = solver_search(s, 20_000, rng=np.random.default_rng(6))
        assert move == 2


class TestReferenceOpponent:
    def test_level_scales_budget(self):
        opponent = make_reference_opponent(10, 100)
        assert opponent.iterations == 1000
        assert make_reference_opponent(1, 37).iterations == 37

    def test_invalid_levels_rejected(self):
        with pytest.raises(ValueError):
            make_reference_opponent(7, 100)
        with pytest.raises(ValueError):
            make_reference_opponent(10, 0)

    def test_opponent_is_callable_and_stateless(self):
        opponent = make_reference_opponent(1, 300)
        s = initial_state("tictactoe")
        a = opponent(s, np.random.default_rng(7))
        b = opponent(s, np.random.default_rng(7))
        assert a == b  # same seed, fresh tree: no state carried between calls

    @pytest.mark.slow
    def test_monotone_strength_level_1000_beats_level_1(self):
        game = get_game("connect4")
        strong = make_reference_opponent(1000, 1)
        weak = make_reference_opponent(1, 1)
        rng = np.random.default_rng(8)
        scores = []
        for i in range(200):
            stronger_first = i % 2 == 0
            s = game.initial_state()
            while not s.is_terminal():
                agent = strong if (s.to_move == 1) == stronger_first else weak
                s = apply_action(s, agent(s, rng))
            z = s.outcome.for_player(1 if stronger_first else 2)
            scores.append({1: 1.0, 0: 0.5, -1: 0.0}[z])
        mean = float(np.mean(scores))
        half = 1.96 * math.sqrt(mean * (1 - mean) / len(scores))
        assert mean - half > 0.5, f"win rate {mean:.3f} +- {half:.3f}"
