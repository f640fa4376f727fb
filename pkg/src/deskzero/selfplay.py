"""Self-play trajectory generation: training actors and archive actors.

A training actor repeatedly picks a start state, plays a full trajectory
with search + exploration noise, and pushes it onto the learner's queue.
Where the trajectory starts is the search-control knob:

  * plain self-play always starts at the initial state,
  * archive-based control starts at the initial state with probability
    ``start_from_initial_prob`` and otherwise at a uniform archive draw,
  * optional opening initialization samples a few raw-prior moves first,
  * optional branching restarts play from a perturbed step of the actor's
    previous trajectory.

Archive actors (used when the archive holds search states) always play full
matches from the initial state, collect every nonterminal state expanded by
their searches, and push those into the archive once per finished match.
They produce no training data.

Within one trajectory the move index t starts at 0 wherever the trajectory
begins; actions are sampled from the search policy while t < sampling_moves
and taken greedily afterwards.
"""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass, field, replace

import numpy as np

from .archive import Archive
from .games import Game, GameState, Outcome
from .mcts import SearchConfig, run_search, sample_playout_cap
from .model import TrainingSample, encode

TRAJECTORY_ORIGINS = ("initial_state", "archive", "katago_init", "branch")


@dataclass(frozen=True)
class KataGoInitConfig:
    """Opening initialization: play m raw-prior moves before the trajectory,
    with m drawn uniformly from {0, ..., max_moves}."""

    max_moves: int = 6

    def __post_init__(self):
        if self.max_moves < 0:
            raise ValueError("max_moves must be >= 0")


@dataclass(frozen=True)
class BranchingConfig:
    """Trajectory branching off the actor's previous trajectory.

    With probability ``p_branch_alt`` restart from a random step with a
    different (uniformly chosen) action; with probability ``p_branch_value``
    restart from an early step with the best-valued of a few sampled
    actions; otherwise no branch happens.
    """

    p_branch_alt: float = 0.05
    p_branch_value: float = 0.05
    branch_window: int = 10
    n_sampled_actions: int = 4

    def __post_init__(self):
        if self.p_branch_alt < 0 or self.p_branch_value < 0:
            raise ValueError("branch probabilities must be >= 0")
        if self.p_branch_alt + self.p_branch_value > 1:
            raise ValueError("branch probabilities must sum to <= 1")
        if self.branch_window < 1:
            raise ValueError("branch_window must be >= 1")
        if self.n_sampled_actions < 1:
            raise ValueError("n_sampled_actions must be >= 1")


@dataclass(frozen=True)
class SelfplayConfig:
    search: SearchConfig
    sampling_moves: int = 0
    start_from_initial_prob: float = 1.0
    katago_init: KataGoInitConfig | None = None
    branching: BranchingConfig | None = None

    def __post_init__(self):
        if self.sampling_moves < 0:
            raise ValueError("sampling_moves must be >= 0")
        if not 0.0 <= self.start_from_initial_prob <= 1.0:
            raise ValueError("start_from_initial_prob must be in [0, 1]")


@dataclass
class TrajectoryStep:
    state: GameState
    policy: np.ndarray
    action: int
    policy_weight: float = 1.0


@dataclass
class Trajectory:
    steps: list[TrajectoryStep]
    outcome: Outcome
    start_state: GameState
    trajectory_id: int
    origin: str
    search_states: list[GameState] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)


def select_start_state(
    game: Game, archive: Archive, start_from_initial_prob: float,
    rng: np.random.Generator,
) -> tuple[GameState, str]:
    """Initial state with probability lambda, else a uniform archive draw.

    Returns the state together with its origin tag.
    """
    if rng.random() < start_from_initial_prob:
        return game.initial_state(), "initial_state"
    return archive.sample(rng), "archive"


def generate_trajectory(
    game: Game,
    start: GameState,
    net,
    cfg: SelfplayConfig,
    rng: np.random.Generator,
    trajectory_id: int = -1,
    origin: str = "initial_state",
    collect_search_states: bool = False,
) -> Trajectory:
    """Play one trajectory from ``start`` to a terminal state.

    Value targets (applied later, per step) are the final outcome converted
    to each step's player-to-move perspective. With playout cap
    randomization active, reduced searches run without forced playouts and
    mark their step so the policy target is excluded from training.
    """
    if start.is_terminal():
        raise ValueError("cannot start a trajectory from a terminal state")
    steps: list[TrajectoryStep] = []
    search_states: list[GameState] = []
    state = start
    t = 0
    while not state.is_terminal():
        move_cfg = cfg.search
        policy_weight = 1.0
        if move_cfg.playout_cap is not None:
            iterations, full = sample_playout_cap(move_cfg.playout_cap, rng)
            move_cfg = replace(
                move_cfg,
                iterations=iterations,
                playout_cap=None,
                forced_playouts=move_cfg.forced_playouts if full else None,
            )
            policy_weight = 1.0 if full else 0.0
        result = run_search(
            state, net, move_cfg, rng, collect_search_states=collect_search_states
        )
        if collect_search_states:
            search_states.extend(result.search_states)
        if t < cfg.sampling_moves:
            action = int(rng.choice(len(result.policy), p=result.policy))
        else:
            action = int(np.argmax(result.policy))
        steps.append(TrajectoryStep(state, result.policy, action, policy_weight))
        state = game.apply_action(state, action)
        t += 1
    return Trajectory(
        steps=steps,
        outcome=state.outcome,
        start_state=start,
        trajectory_id=trajectory_id,
        origin=origin,
        search_states=search_states,
    )


def trajectory_to_samples(trajectory: Trajectory) -> list[TrainingSample]:
    """Training tuples for every step, outcomes in player-to-move perspective."""
    z = trajectory.outcome
    return [
        TrainingSample(
            features=encode(step.state),
            policy_target=step.policy,
            value_target=float(z.for_player(step.state.to_move)),
            trajectory_id=trajectory.trajectory_id,
            policy_weight=step.policy_weight,
        )
        for step in trajectory.steps
    ]


def katago_init_start(
    game: Game, net, cfg: KataGoInitConfig, rng: np.random.Generator,
    max_retries: int = 10,
) -> GameState:
    """Opening state reached by sampling raw network priors for a few moves.

    No search is involved. If the sampled opening runs into a terminal
    state, the whole procedure restarts from the initial state; the
    returned state is always nonterminal.
    """
    for _ in range(max_retries):
        state = game.initial_state()
        n_moves = int(rng.integers(0, cfg.max_moves + 1))
        dead_end = False
        for _ in range(n_moves):
            actions = game.legal_actions(state)
            priors, _ = net(state)
            masked = np.asarray(priors, dtype=np.float64)[actions]
            total = masked.sum()
            if total > 0:
                masked = masked / total
            else:
                masked = np.full(len(actions), 1.0 / len(actions))
            state = game.apply_action(state, actions[int(rng.choice(len(actions), p=masked))])
            if state.is_terminal():
                dead_end = True
                break
        if not dead_end:
            return state
    return game.initial_state()


def katago_branch(
    game: Game,
    trajectory: Trajectory,
    cfg: BranchingConfig,
    net,
    rng: np.random.Generator,
    max_retries: int = 10,
) -> GameState | None:
    """Branch point derived from a finished trajectory, or None for no branch.

    Mode probabilities come from ``cfg``; terminal successors are rejected
    and redrawn. Falls back to None when no usable branch is found.
    """
    r = rng.random()
    if r < cfg.p_branch_alt:
        mode = "alt"
    elif r < cfg.p_branch_alt + cfg.p_branch_value:
        mode = "value"
    else:
        return None

    if not trajectory.steps:
        return None

    for _ in range(max_retries):
        if mode == "alt":
            step = trajectory.steps[int(rng.integers(len(trajectory.steps)))]
            alternatives = [a for a in game.legal_actions(step.state) if a != step.action]
            if not alternatives:
                continue
            successor = game.apply_action(
                step.state, alternatives[int(rng.integers(len(alternatives)))]
            )
            if not successor.is_terminal():
                return successor
        else:
            window = trajectory.steps[: cfg.branch_window]
            step = window[int(rng.integers(len(window)))]
            actions = game.legal_actions(step.state)
            n = min(cfg.n_sampled_actions, len(actions))
            sampled = rng.choice(actions, size=n, replace=False)
            best_state, best_value = None, -np.inf
            for action in sampled:
                successor = game.apply_action(step.state, int(action))
                if successor.is_terminal():
                    continue  # rejected; the redraw happens via retries if all die
                _, v = net(successor)
                value_for_brancher = -float(v)
                if value_for_brancher > best_value:
                    best_state, best_value = successor, value_for_brancher
            if best_state is not None:
                return best_state
    return None


class ParamsBox:
    """Latest-wins parameter snapshot holder shared by learner and actors."""

    def __init__(self, net):
        self._lock = threading.Lock()
        self._net = net

    def publish(self, net) -> None:
        with self._lock:
            self._net = net

    def latest(self):
        with self._lock:
            return self._net


class TrainingActor:
    """Produces trajectories; start-state policy is decided per trajectory.

    Parameter snapshots are refreshed between trajectories, never mid-way,
    so every trajectory is played under one coherent policy.
    """

    def __init__(
        self,
        actor_id: int,
        num_actors: int,
        game: Game,
        cfg: SelfplayConfig,
        params_source: ParamsBox,
        rng: np.random.Generator,
        archive: Archive | None = None,
    ):
        self.actor_id = actor_id
        self.num_actors = num_actors
        self.game = game
        self.cfg = cfg
        self.params_source = params_source
        self.rng = rng
        self.archive = archive
        self._produced = 0
        self._last_trajectory: Trajectory | None = None

    def next_trajectory(self) -> Trajectory:
        net = self.params_source.latest()
        start, origin = self._pick_start(net)
        trajectory_id = self.actor_id + self.num_actors * self._produced
        trajectory = generate_trajectory(
            self.game, start, net, self.cfg, self.rng,
            trajectory_id=trajectory_id, origin=origin,
        )
        self._produced += 1
        self._last_trajectory = trajectory
        return trajectory

    def _pick_start(self, net) -> tuple[GameState, str]:
        cfg = self.cfg
        if cfg.branching is not None and self._last_trajectory is not None:
            branched = katago_branch(
                self.game, self._last_trajectory, cfg.branching, net, self.rng
            )
            if branched is not None:
                return branched, "branch"
        if cfg.katago_init is not None:
            return katago_init_start(self.game, net, cfg.katago_init, self.rng), "katago_init"
        if self.archive is not None:
            return select_start_state(
                self.game, self.archive, cfg.start_from_initial_prob, self.rng
            )
        return self.game.initial_state(), "initial_state"


class ArchiveActor:
    """Plays full matches from the initial state and feeds search states
    into the shared archive, once per completed match."""

    def __init__(
        self,
        game: Game,
        cfg: SelfplayConfig,
        params_source: ParamsBox,
        archive: Archive,
        rng: np.random.Generator,
    ):
        self.game = game
        self.cfg = cfg
        self.params_source = params_source
        self.archive = archive
        self.rng = rng
        self.matches_played = 0

    def play_archive_match(self) -> int:
        """One full match; returns the number of states offered to the archive."""
        net = self.params_source.latest()
        trajectory = generate_trajectory(
            self.game, self.game.initial_state(), net, self.cfg, self.rng,
            trajectory_id=-1, origin="initial_state", collect_search_states=True,
        )
        self.archive.update(trajectory.search_states)
        self.matches_played += 1
        return len(trajectory.search_states)


def training_actor_loop(
    actor: TrainingActor,
    trajectory_queue: "queue.Queue[Trajectory]",
    stop_event: threading.Event,
) -> None:
    """Generate and enqueue trajectories until told to stop.

    Each trajectory is enqueued atomically as a whole unit; on shutdown an
    unqueued in-flight trajectory is dropped whole.
    """
    while not stop_event.is_set():
        trajectory = actor.next_trajectory()
        while not stop_event.is_set():
            try:
                trajectory_queue.put(trajectory, timeout=0.2)
                break
            except queue.Full:
                continue


def archive_actor_loop(actor: ArchiveActor, stop_event: threading.Event) -> None:
    """Play archive matches back to back until told to stop."""
    while not stop_event.is_set():
        actor.play_archive_match()
