"""Measurement harness: reference-opponent evaluation, tournaments, and
state-coverage / value-loss diagnostics.

Agents are callables ``agent(state, rng) -> action``. Evaluation agents
always play noise-free and pick the most-visited root action from move 0;
match scores are 1 / 0.5 / 0 recorded for the player-1 seat, and every
pairing plays equal numbers of games per seat.

Training-time evaluation at paper scale is asynchronous; here checkpoints
are evaluated post-hoc on the checkpoint grid and the per-step learning
curve is reconstructed with the same trailing 50-step window before AUC
(the sum of windowed win rates over all steps) is computed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .games import Game, GameState, get_game, state_key
from .mcts import SearchConfig, run_search
from .model import Network, load_checkpoint
from .selfplay import SelfplayConfig, generate_trajectory
from .solver import make_reference_opponent

EVAL_LEVELS = (1, 10, 100, 1000)
WINDOW_STEPS = 50


# ----------------------------------------------------------------------
# agents
# ----------------------------------------------------------------------

def make_network_agent(net: Network, iterations: int, c_puct: float = 1.0):
    """Noise-free searcher that plays the most-visited root action."""
    cfg = SearchConfig(iterations=iterations, c_puct=c_puct)

    def agent(state: GameState, rng: np.random.Generator) -> int:
        result = run_search(state, net, cfg, rng, collect_search_states=False)
        return int(np.argmax(result.root_visits))

    return agent


def make_random_agent():
    def agent(state: GameState, rng: np.random.Generator) -> int:
        game = get_game(state.game_id)
        actions = game.legal_actions(state)
        return actions[int(rng.integers(len(actions)))]

    return agent


# ----------------------------------------------------------------------
# matches
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class MatchResult:
    """One finished game. ``score`` is for the player-1 seat: 1 win, 0.5
    draw, 0 loss."""

    score: float
    moves: int
    seats: tuple[str, str] = ("p1", "p2")


def play_match(
    agent_p1,
    agent_p2,
    game: Game,
    rng: np.random.Generator,
    seats: tuple[str, str] = ("p1", "p2"),
) -> MatchResult:
    state = game.initial_state()
    moves = 0
    while not state.is_terminal():
        agent = agent_p1 if state.to_move == 1 else agent_p2
        state = game.apply_action(state, agent(state, rng))
        moves += 1
    score = {1: 1.0, 0: 0.5, -1: 0.0}[state.outcome.value]
    return MatchResult(score=score, moves=moves, seats=seats)


def play_pair(agent_a, agent_b, game, rng, names=("a", "b")) -> tuple[float, float]:
    """Two seat-swapped games; returns both scores from agent_a's side."""
    first = play_match(agent_a, agent_b, game, rng, seats=names)
    swapped = play_match(agent_b, agent_a, game, rng, seats=(names[1], names[0]))
    return first.score, 1.0 - swapped.score


# ----------------------------------------------------------------------
# reference-opponent evaluation
# ----------------------------------------------------------------------

@dataclass
class CheckpointEvaluation:
    step: int
    rates: dict[int, float]
    records: list[tuple[int, str, float]] = field(default_factory=list)
    # records: (level, seat, score from the agent's side)


def evaluate_checkpoint(
    checkpoint_path,
    levels,
    n_matches: int,
    base_iterations: int,
    rng: np.random.Generator,
    step: int = -1,
    c_uct: float | None = None,
) -> CheckpointEvaluation:
    """Play ``n_matches`` per difficulty level, half per seat, and average."""
    net = load_checkpoint(checkpoint_path)
    game = get_game(net.game_id)
    agent = make_network_agent(net, base_iterations)
    evaluation = CheckpointEvaluation(step=step, rates={})
    for level in levels:
        opponent = (
            make_reference_opponent(level, base_iterations)
            if c_uct is None
            else make_reference_opponent(level, base_iterations, c_uct=c_uct)
        )
        scores = []
        for i in range(n_matches):
            if i % 2 == 0:
                result = play_match(agent, opponent, game, rng, seats=("agent", "solver"))
                score = result.score
                seat = "p1"
            else:
                result = play_match(opponent, agent, game, rng, seats=("solver", "agent"))
                score = 1.0 - result.score
                seat = "p2"
            scores.append(score)
            evaluation.records.append((level, seat, score))
        if scores:
            evaluation.rates[level] = float(np.mean(scores))
    return evaluation


def evaluate_run(
    run_dir,
    levels=(10,),
    matches_per_checkpoint: int = 20,
    base_iterations: int | None = None,
    seed: int = 0,
    out_name: str = "eval.csv",
) -> list[dict]:
    """Evaluate every checkpoint listed in a run manifest; write eval.csv.

    ``base_iterations`` defaults to the run's own per-move search budget.
    """
    run_dir = Path(run_dir)
    with open(run_dir / "manifest.json") as fh:
        manifest = json.load(fh)
    if base_iterations is None:
        base_iterations = manifest["config"]["search_iterations"]
    rng = np.random.default_rng(seed)
    rows = []
    for rel in manifest["checkpoints"]:
        step = int(Path(rel).stem.split("_")[-1])
        evaluation = evaluate_checkpoint(
            run_dir / rel, levels, matches_per_checkpoint, base_iterations, rng,
            step=step,
        )
        for level in levels:
            rows.append(
                {
                    "step": step,
                    "level": level,
                    "matches": matches_per_checkpoint,
                    "mean_score": evaluation.rates[level],
                }
            )
    rows.sort(key=lambda r: (r["level"], r["step"]))
    out_path = run_dir / out_name
    with open(out_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["step", "level", "matches", "mean_score"])
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {**row, "mean_score": f"{row['mean_score']:.10g}"}
            )
    return rows


# ----------------------------------------------------------------------
# learning curves and AUC
# ----------------------------------------------------------------------

@dataclass
class LearningCurve:
    """Per-level windowed win rates for steps 1..total_steps."""

    total_steps: int
    values: dict[int, np.ndarray]

    def value_at(self, level: int, step: int) -> float:
        return float(self.values[level][step - 1])


def build_learning_curve(
    eval_rows: list[dict], total_steps: int, window: int = WINDOW_STEPS
) -> LearningCurve:
    """Trailing-window win rate at every step from grid evaluations.

    The rate at step t averages match results from steps in (t-window, t],
    weighted by match counts; steps whose window is empty carry the last
    known rate forward (0 before any evaluation).
    """
    levels = sorted({row["level"] for row in eval_rows})
    values = {}
    for level in levels:
        rows = [r for r in eval_rows if r["level"] == level]
        curve = np.zeros(total_steps)
        last = 0.0
        for t in range(1, total_steps + 1):
            in_window = [r for r in rows if t - window < r["step"] <= t]
            if in_window:
                weight = sum(r["matches"] for r in in_window)
                last = sum(r["mean_score"] * r["matches"] for r in in_window) / weight
            curve[t - 1] = last
        values[level] = curve
    return LearningCurve(total_steps=total_steps, values=values)


def compute_auc(curve: LearningCurve) -> dict[int, float]:
    """Sum of windowed win rates over all steps, per opponent level."""
    return {level: float(vals.sum()) for level, vals in curve.values.items()}


# ----------------------------------------------------------------------
# head-to-head tournaments
# ----------------------------------------------------------------------

def tournament(
    checkpoints_a,
    checkpoints_b,
    iterations: int,
    rng: np.random.Generator,
    names: tuple[str, str] = ("a", "b"),
) -> tuple[float, int]:
    """Full cross-pairing: every A checkpoint meets every B checkpoint in
    one game per seat. Returns (win rate for side A, games played)."""
    nets_a = [load_checkpoint(path) for path in checkpoints_a]
    nets_b = [load_checkpoint(path) for path in checkpoints_b]
    if not nets_a or not nets_b:
        raise ValueError("tournament needs at least one checkpoint per side")
    game = get_game(nets_a[0].game_id)
    scores = []
    for net_a in nets_a:
        agent_a = make_network_agent(net_a, iterations)
        for net_b in nets_b:
            agent_b = make_network_agent(net_b, iterations)
            scores.extend(play_pair(agent_a, agent_b, game, rng, names=names))
    return float(np.mean(scores)), len(scores)


# ----------------------------------------------------------------------
# state-coverage and value-loss diagnostics
# ----------------------------------------------------------------------

def unique_states_by_depth(trajectory_log) -> dict[int, int]:
    """Distinct visited states per game-tree depth, from a trajectory log.

    Accepts a path to a trajectories.jsonl file or an iterable of already
    decoded records.
    """
    if isinstance(trajectory_log, (str, Path)):
        with open(trajectory_log) as fh:
            records = [json.loads(line) for line in fh if line.strip()]
    else:
        records = list(trajectory_log)
    seen: dict[int, set] = {}
    for record in records:
        for ply, key in record["states"]:
            seen.setdefault(int(ply), set()).add(key)
    return {depth: len(keys) for depth, keys in sorted(seen.items())}


def value_loss_report(
    net: Network,
    selfplay_cfg: SelfplayConfig,
    n_games: int,
    mode: str,
    rng: np.random.Generator,
    continuation_iterations: int | None = None,
) -> dict:
    """Mean squared value error over visited or search states.

    Visited mode plays ``n_games`` normal (noisy, action-sampled) self-play
    games from the initial state and scores the value head against each
    game's final outcome. Search mode takes every state observed during
    those games' searches, plays a noise-free greedy continuation from it
    with both sides at ``continuation_iterations``, and scores the value
    head against the continuation's outcome.
    """
    if mode not in ("visited", "search"):
        raise ValueError(f"mode must be 'visited' or 'search', got {mode!r}")
    if n_games < 1:
        raise ValueError("n_games must be >= 1")
    game = get_game(net.game_id)
    collect = mode == "search"
    errors = []
    search_pool: dict[str, GameState] = {}
    for _ in range(n_games):
        trajectory = generate_trajectory(
            game, game.initial_state(), net, selfplay_cfg, rng,
            collect_search_states=collect,
        )
        if mode == "visited":
            z = trajectory.outcome
            for step in trajectory.steps:
                _, v = net(step.state)
                errors.append((z.for_player(step.state.to_move) - v) ** 2)
        else:
            for state in trajectory.search_states:
                search_pool.setdefault(state_key(state), state)

    if mode == "search":
        iterations = continuation_iterations or selfplay_cfg.search.iterations
        greedy_cfg = SelfplayConfig(
            search=SearchConfig(
                iterations=iterations,
                c_puct=selfplay_cfg.search.c_puct,
                temperature=selfplay_cfg.search.temperature,
            ),
            sampling_moves=0,
        )
        for state in search_pool.values():
            continuation = generate_trajectory(game, state, net, greedy_cfg, rng)
            z = continuation.outcome
            _, v = net(state)
            errors.append((z.for_player(state.to_move) - v) ** 2)

    return {
        "mode": mode,
        "mse": float(np.mean(errors)),
        "n_states": len(errors),
        "n_games": n_games,
        "step": net.step,
    }


# ----------------------------------------------------------------------
# cross-seed curve aggregation
# ----------------------------------------------------------------------

def emit_curves(run_dirs, out_path, window: int = WINDOW_STEPS) -> list[dict]:
    """Aggregate per-run eval.csv files into a tidy cross-seed curve CSV.

    Output rows: step, level, mean_win_rate, ci95_low, ci95_high. The 95%
    interval uses the normal approximation over per-seed means; a single
    seed yields a zero-width interval.
    """
    per_run_curves = []
    total_steps = 0
    for run_dir in run_dirs:
        run_dir = Path(run_dir)
        with open(run_dir / "manifest.json") as fh:
            manifest = json.load(fh)
        total_steps = max(total_steps, manifest["total_steps"])
        rows = []
        with open(run_dir / "eval.csv") as fh:
            for row in csv.DictReader(fh):
                rows.append(
                    {
                        "step": int(row["step"]),
                        "level": int(row["level"]),
                        "matches": int(row["matches"]),
                        "mean_score": float(row["mean_score"]),
                    }
                )
        per_run_curves.append(rows)
    if not per_run_curves:
        raise ValueError("emit_curves needs at least one run directory")

    curves = [
        build_learning_curve(rows, total_steps, window=window) for rows in per_run_curves
    ]
    levels = sorted(curves[0].values)
    out_rows = []
    for level in levels:
        stacked = np.stack([c.values[level] for c in curves])  # [seeds, steps]
        means = stacked.mean(axis=0)
        if stacked.shape[0] > 1:
            sd = stacked.std(axis=0, ddof=1)
            half = 1.96 * sd / np.sqrt(stacked.shape[0])
        else:
            half = np.zeros_like(means)
        for t in range(total_steps):
            out_rows.append(
                {
                    "step": t + 1,
                    "level": level,
                    "mean_win_rate": means[t],
                    "ci95_low": means[t] - half[t],
                    "ci95_high": means[t] + half[t],
                }
            )
    with open(out_path, "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["step", "level", "mean_win_rate", "ci95_low", "ci95_high"]
        )
        writer.writeheader()
        for row in out_rows:
            writer.writerow(
                {
                    "step": row["step"],
                    "level": row["level"],
                    "mean_win_rate": f"{row['mean_win_rate']:.10g}",
                    "ci95_low": f"{row['ci95_low']:.10g}",
                    "ci95_high": f"{row['ci95_high']:.10g}",
                }
            )
    return out_rows
