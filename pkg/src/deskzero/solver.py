"""UCT reference opponent that proves game-theoretic values as it searches.

This is the fixed yardstick the training runs are measured against. It is
plain UCT (mean value + exploration bonus, random playouts at the leaves)
extended with value proving: terminal results propagate as proven
win/loss/draw labels, so with enough iterations the search returns exact
moves instead of estimates. Difficulty is scaled purely through the
iteration budget (1x/10x/100x/1000x of the learning agent's).

Proven values are always from the perspective of the player to move at the
node: +1 win, 0 draw, -1 loss.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .games import GameState, game_for

PROVEN_WIN = 1
PROVEN_DRAW = 0
PROVEN_LOSS = -1


class SolverNode:
    """One search node: visit/value stats plus an optional proven label."""

    __slots__ = ("state", "visits", "value_sum", "proven", "children", "expanded")

    def __init__(self, state: GameState):
        self.state = state
        self.visits = 0
        self.value_sum = 0.0  # sum of playout results, this node's perspective
        self.children: list[SolverNode] | None = None
        self.expanded = False
        if state.is_terminal():
            self.proven: int | None = state.outcome.for_player(state.to_move)
        else:
            self.proven = None


def _expand(node: SolverNode, game) -> None:
    state = node.state
    node.children = [
        SolverNode(game.apply_action(state, a)) for a in game.legal_actions(state)
    ]
    node.expanded = True
    _prove_from_children(node)


def _prove_from_children(node: SolverNode) -> None:
    """Apply the proving rules, assuming node.children exists."""
    best = None
    for child in node.children:
        if child.proven is None:
            # a losing child still proves the node outright
            if any(c.proven == PROVEN_LOSS for c in node.children):
                node.proven = PROVEN_WIN
            return
        value = -child.proven
        if best is None or value > best:
            best = value
    node.proven = best


def _playout(state: GameState, game, rng: random.Random) -> int:
    mover = state.to_move
    while not state.is_terminal():
        actions = game.legal_actions(state)
        state = game.apply_action(state, actions[rng.randrange(len(actions))])
    return state.outcome.for_player(mover)


def _select_child(node: SolverNode, c_uct: float) -> SolverNode | None:
    """Unvisited children first in index order, then UCT over unproven ones."""
    best = None
    best_score = -math.inf
    log_n = math.log(node.visits) if node.visits > 0 else 0.0
    for child in node.children:
        if child.proven is not None:
            continue
        if child.visits == 0:
            return child
        score = -child.value_sum / child.visits + c_uct * math.sqrt(log_n / child.visits)
        if score > best_score:
            best = child
            best_score = score
    return best


def solver_search(
    root: GameState,
    iterations: int,
    c_uct: float = math.sqrt(2.0),
    rng: np.random.Generator | None = None,
) -> int:
    """Search ``root`` and return the chosen action.

    Stops early once the root's value is fully proven (no further iteration
    can change the move choice). With a proven-win root, a proving move is
    returned; otherwise the most-visited move that is not a proven loss
    (falling back to most-visited overall when everything loses).
    """
    if root.is_terminal():
        raise ValueError("solver_search called on terminal state")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if rng is None:
        rng = np.random.default_rng()
    local_rng = random.Random(int(rng.integers(0, 2**63)))

    game = game_for(root)
    root_node = SolverNode(root)

    for _ in range(iterations):
        if root_node.proven is not None:
            break
        _one_iteration(root_node, game, c_uct, local_rng)

    return _choose_move(root_node, game)


def _choose_move(root_node: SolverNode, game) -> int:
    actions = game.legal_actions(root_node.state)
    children = root_node.children
    if children is None:
        # iteration budget spent before the root was expanded (proven roots
        # with zero expansion cannot happen for nonterminal states)
        return actions[0]
    if root_node.proven == PROVEN_WIN:
        for action, child in zip(actions, children):
            if child.proven == PROVEN_LOSS:
                return action
    candidates = [
        (action, child)
        for action, child in zip(actions, children)
        if child.proven != PROVEN_WIN
    ]
    if not candidates:  # every reply wins for the opponent
        candidates = list(zip(actions, children))
    best_action, _ = max(candidates, key=lambda ac: ac[1].visits)
    # max() keeps the first of equal visit counts, i.e. the lowest index
    return best_action


def root_proven_value(root: GameState, iterations: int, c_uct: float = math.sqrt(2.0),
                      rng: np.random.Generator | None = None) -> int | None:
    """Run a search and report the root's proven label (None if unproven).

    Diagnostic companion to :func:`solver_search` for strength audits.
    """
    if rng is None:
        rng = np.random.default_rng()
    local_rng = random.Random(int(rng.integers(0, 2**63)))
    game = game_for(root)
    root_node = SolverNode(root)
    for _ in range(iterations):
        if root_node.proven is not None:
            break
        _one_iteration(root_node, game, c_uct, local_rng)
    return root_node.proven


def _one_iteration(root_node: SolverNode, game, c_uct: float,
                   local_rng: random.Random) -> None:
    """Select, evaluate (playout or proven label), back up, propagate proofs."""
    node = root_node
    path = [node]
    while True:
        if node.proven is not None:
            value = node.proven
            break
        if node.visits == 0 and node is not root_node:
            value = _playout(node.state, game, local_rng)
            break
        if not node.expanded:
            _expand(node, game)
            if node.proven is not None:
                value = node.proven
                break
        child = _select_child(node, c_uct)
        if child is None:
            # every child proven: label this node from them
            _prove_from_children(node)
            value = node.proven
            break
        path.append(child)
        node = child

    # back up the value, flipping perspective each ply; push proven labels
    # upward while they keep resolving parents
    v = value
    child_proven = path[-1].proven is not None
    for i in range(len(path) - 1, -1, -1):
        n = path[i]
        n.visits += 1
        n.value_sum += v
        v = -v
        if i > 0 and child_proven:
            parent = path[i - 1]
            if parent.proven is None:
                if n.proven == PROVEN_LOSS:
                    parent.proven = PROVEN_WIN
                elif all(c.proven is not None for c in parent.children):
                    _prove_from_children(parent)
            child_proven = parent.proven is not None


@dataclass(frozen=True)
class SolverOpponent:
    """Reference opponent: fresh solver tree per move, fixed iteration budget."""

    iterations: int
    c_uct: float = math.sqrt(2.0)

    def select_action(self, state: GameState, rng: np.random.Generator) -> int:
        return solver_search(state, self.iterations, self.c_uct, rng)

    def __call__(self, state: GameState, rng: np.random.Generator) -> int:
        return self.select_action(state, rng)


def make_reference_opponent(level: int, base_iterations: int,
                            c_uct: float = math.sqrt(2.0)) -> SolverOpponent:
    """Opponent running ``level`` times the agent's per-move search budget."""
    if level not in (1, 10, 100, 1000):
        raise ValueError(f"unsupported difficulty level {level}")
    if base_iterations < 1:
        raise ValueError("base_iterations must be >= 1")
    return SolverOpponent(iterations=level * base_iterations, c_uct=c_uct)
