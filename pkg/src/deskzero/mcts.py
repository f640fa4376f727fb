"""PUCT tree search guided by a policy-value function.

One search instance owns its tree and runs single-threaded; concurrency
happens by running many searches in different workers against a shared
read-only parameter snapshot. Each move starts a fresh tree.

The policy-value function is any callable ``net(state) -> (policy, value)``
where ``policy`` covers the full action space (it is masked to legal actions
and renormalized here) and ``value`` is in [-1, 1] from the perspective of
the player to move at ``state``.

Sign convention: stored edge values Q(s, a) are from the perspective of the
player who moves at s, so backup negates the leaf value once per ply.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .games import GameState, game_for


@dataclass(frozen=True)
class PlayoutCapConfig:
    """Playout cap randomization: full searches with probability p_full,
    cheap searches otherwise. Cheap searches keep their value targets but
    their policies are excluded from training."""

    p_full: float
    full_iterations: int
    small_iterations: int

    def __post_init__(self):
        if not 0.0 < self.p_full < 1.0:
            raise ValueError("p_full must be in (0, 1)")
        if self.small_iterations < 1 or self.full_iterations < self.small_iterations:
            raise ValueError("need full_iterations >= small_iterations >= 1")


@dataclass(frozen=True)
class ForcedPlayoutsConfig:
    """Forced playouts at the root plus policy-target pruning afterwards."""

    k_forced: float

    def __post_init__(self):
        if self.k_forced < 0:
            raise ValueError("k_forced must be >= 0")


@dataclass(frozen=True)
class SearchConfig:
    iterations: int
    c_puct: float = 1.0
    dirichlet_alpha: float = 1.0
    dirichlet_epsilon: float = 0.25
    temperature: float = 1.0
    use_root_noise: bool = False
    playout_cap: PlayoutCapConfig | None = None
    forced_playouts: ForcedPlayoutsConfig | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.c_puct <= 0:
            raise ValueError("c_puct must be positive")
        if self.dirichlet_alpha <= 0:
            raise ValueError("dirichlet_alpha must be positive")
        if not 0.0 <= self.dirichlet_epsilon < 1.0:
            raise ValueError("dirichlet_epsilon must be in [0, 1)")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


class SearchNode:
    """Expanded position: per-legal-action priors, visit counts, value sums.

    Q(s, a) is exposed as W/N with Q = 0 for unvisited edges. The node's own
    visit count N(s) is tracked incrementally and always equals the sum of
    its edge counts.
    """

    __slots__ = (
        "state", "actions", "priors", "visit_counts", "total_values",
        "children", "_visit_total",
    )

    def __init__(self, state: GameState, actions: list[int], priors: np.ndarray):
        self.state = state
        self.actions = actions
        self.priors = priors
        self.visit_counts = np.zeros(len(actions), dtype=np.int64)
        self.total_values = np.zeros(len(actions), dtype=np.float64)
        self.children: list[SearchNode | GameState | None] = [None] * len(actions)
        self._visit_total = 0

    def q_values(self) -> np.ndarray:
        # unvisited edges have W = 0, so dividing by max(N, 1) leaves Q = 0
        return self.total_values / np.maximum(self.visit_counts, 1)

    def visit_total(self) -> int:
        return self._visit_total


@dataclass
class SearchResult:
    """Outcome of one search: training policy over the full action space,
    raw root visits, the root value estimate, and the nonterminal states
    expanded along the way (root excluded)."""

    policy: np.ndarray
    root_visits: np.ndarray
    root_value: float
    search_states: list[GameState] = field(default_factory=list)


def _puct_index(node: SearchNode, c_puct: float) -> int:
    counts = node.visit_counts
    scores = node.total_values / np.maximum(counts, 1)
    scores += (c_puct * math.sqrt(node._visit_total)) * (node.priors / (1.0 + counts))
    return int(np.argmax(scores))


def puct_select(node: SearchNode, c_puct: float) -> int:
    """Action maximizing Q + c * P * sqrt(N(s)) / (1 + N(s,a)); lowest index wins ties."""
    return node.actions[_puct_index(node, c_puct)]


def mix_dirichlet(priors: np.ndarray, noise: np.ndarray, epsilon: float) -> np.ndarray:
    """Convex mix (1 - eps) * p + eps * d of two distributions over legal actions."""
    return (1.0 - epsilon) * priors + epsilon * noise


def visits_to_policy(root_visits: np.ndarray, temperature: float) -> np.ndarray:
    """Visit counts to a sampling distribution: N^(1/tau), renormalized."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    counts = np.asarray(root_visits, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise ValueError("visits_to_policy needs at least one visit")
    scaled = np.zeros_like(counts)
    positive = counts > 0
    # divide by the max first so large counts cannot overflow at small tau
    scaled[positive] = (counts[positive] / counts[positive].max()) ** (1.0 / temperature)
    return scaled / scaled.sum()


def sample_playout_cap(cap: PlayoutCapConfig, rng: np.random.Generator) -> tuple[int, bool]:
    """Draw this move's iteration budget. Returns (iterations, is_full_search)."""
    if rng.random() < cap.p_full:
        return cap.full_iterations, True
    return cap.small_iterations, False


def _forced_playout_index(node: SearchNode, k_forced: float) -> int | None:
    """Lowest-index root action still below its forced-visit floor, if any."""
    total = node.visit_total()
    if total == 0:
        return None
    floors = np.ceil(np.sqrt(k_forced * node.priors * total))
    below = np.nonzero(node.visit_counts < floors)[0]
    if below.size == 0:
        return None
    return int(below[0])


def prune_forced_playouts(
    node: SearchNode, k_forced: float, c_puct: float
) -> np.ndarray:
    """Visit counts with unjustified forced visits removed.

    Keeps the most-visited action untouched. For every other action, up to
    its forced-visit allowance is subtracted, but never so much that the
    action's PUCT score (recomputed at the reduced count) would exceed the
    most-visited action's score, since such visits are justified on their
    own. Actions can be reduced to zero.
    """
    visits = node.visit_counts.astype(np.float64).copy()
    if k_forced <= 0:
        return visits
    total = node.visit_total()
    q = node.q_values()
    best = int(np.argmax(node.visit_counts))
    sqrt_total = math.sqrt(total)
    best_score = q[best] + c_puct * node.priors[best] * sqrt_total / (1.0 + visits[best])
    for i in range(len(visits)):
        if i == best or visits[i] == 0:
            continue
        allowance = math.ceil(math.sqrt(k_forced * node.priors[i] * total))
        gap = best_score - q[i]
        if gap <= 0:
            continue  # its value alone justifies every visit
        justified = c_puct * node.priors[i] * sqrt_total / gap - 1.0
        floor = max(0.0, math.ceil(justified))
        keep = max(floor, visits[i] - allowance)
        visits[i] = min(visits[i], keep)
    return visits


def run_search(
    root: GameState,
    net,
    cfg: SearchConfig,
    rng: np.random.Generator,
    collect_search_states: bool = True,
) -> SearchResult:
    """Run cfg.iterations simulations from ``root`` and extract the policy.

    The root is expanded up front (not counted as an iteration), so the root
    visit counts always sum to exactly cfg.iterations. Terminal states
    reached inside the tree back up their exact outcome instead of a network
    evaluation.
    """
    if root.is_terminal():
        raise ValueError("run_search called on terminal state")
    game = game_for(root)

    root_node, _ = _expand(root, game, net)
    if cfg.use_root_noise and len(root_node.actions) > 1:
        noise = rng.dirichlet(np.full(len(root_node.actions), cfg.dirichlet_alpha))
        root_node.priors = mix_dirichlet(root_node.priors, noise, cfg.dirichlet_epsilon)

    k_forced = cfg.forced_playouts.k_forced if cfg.forced_playouts else 0.0
    search_states: list[GameState] = []

    for _ in range(cfg.iterations):
        node = root_node
        path: list[tuple[SearchNode, int]] = []
        at_root = True
        while True:
            idx = None
            if at_root and k_forced > 0:
                idx = _forced_playout_index(node, k_forced)
            if idx is None:
                idx = _puct_index(node, cfg.c_puct)
            at_root = False
            path.append((node, idx))
            child = node.children[idx]
            if child is None:
                child_state = game.apply_action(node.state, node.actions[idx])
                if child_state.is_terminal():
                    node.children[idx] = child_state
                    value = child_state.outcome.for_player(child_state.to_move)
                else:
                    child_node, value = _expand(child_state, game, net)
                    node.children[idx] = child_node
                    if collect_search_states:
                        search_states.append(child_state)
                break
            if isinstance(child, GameState):  # terminal inside the tree
                value = child.outcome.for_player(child.to_move)
                break
            node = child

        for parent, idx in reversed(path):
            value = -value
            parent.visit_counts[idx] += 1
            parent.total_values[idx] += value
            parent._visit_total += 1

    root_visits = np.zeros(game.action_space_size, dtype=np.int64)
    root_visits[root_node.actions] = root_node.visit_counts

    if k_forced > 0:
        pruned = prune_forced_playouts(root_node, k_forced, cfg.c_puct)
        policy_counts = np.zeros(game.action_space_size, dtype=np.float64)
        policy_counts[root_node.actions] = pruned
        policy = visits_to_policy(policy_counts, cfg.temperature)
    else:
        policy = visits_to_policy(root_visits, cfg.temperature)

    best = int(np.argmax(root_node.visit_counts))
    q = root_node.q_values()
    return SearchResult(
        policy=policy,
        root_visits=root_visits,
        root_value=float(q[best]),
        search_states=search_states,
    )


def _expand(state: GameState, game, net) -> tuple[SearchNode, float]:
    """Evaluate ``state`` with the net; returns the node and the net value."""
    actions = game.legal_actions(state)
    policy, value = net(state)
    priors = np.asarray(policy, dtype=np.float64)[actions]
    total = priors.sum()
    if total > 0:
        priors = priors / total
    else:
        priors = np.full(len(actions), 1.0 / len(actions))
    return SearchNode(state, actions, priors), float(value)
