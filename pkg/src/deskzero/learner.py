"""Training orchestration: actors feed trajectories, one learner trains.

Each learning step ingests whole trajectories until at least
``samples_per_step`` new samples entered the replay buffer (overshoot at
trajectory granularity is accepted), runs ``minibatches_per_step`` SGD
updates, applies archive bookkeeping for the active variant, publishes a
fresh parameter snapshot, and appends one metrics row.

Archive writes are exclusive per run: variants built on visited states
update the archive here on the learner, variants built on search states
leave all writes to their archive actors.

Two execution modes share the same learner code. Deterministic mode drives
the actors inline on the learner thread with a fixed round-robin schedule
(byte-identical reruns from the same seed); threaded mode runs free-running
actor threads behind a bounded queue.
"""

from __future__ import annotations

import csv
import json
import queue
import threading
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .archive import ARCHIVE_TYPES, Archive
from .games import get_game, state_key
from .mcts import ForcedPlayoutsConfig, PlayoutCapConfig, SearchConfig
from .model import Network
from .replay import ReplayBuffer
from .selfplay import (
    ArchiveActor,
    BranchingConfig,
    KataGoInitConfig,
    ParamsBox,
    SelfplayConfig,
    TrainingActor,
    Trajectory,
    archive_actor_loop,
    trajectory_to_samples,
    training_actor_loop,
)

METRICS_COLUMNS = (
    "step",
    "loss_total",
    "loss_value",
    "loss_policy",
    "samples",
    "trajectories",
    "archive_size",
    "unique_archive_keys",
)


@dataclass(frozen=True)
class VariantSpec:
    """What a named algorithm variant switches on."""

    control: str  # "none" | "visited" | "search"
    archive_type: str | None = None
    katago_init: bool = False
    branching: bool = False
    playout_cap: bool = False
    forced_playouts: bool = False


VARIANTS: dict[str, VariantSpec] = {
    "alphazero": VariantSpec(control="none"),
    "geve": VariantSpec(control="visited", archive_type="expanding"),
    "gevc": VariantSpec(control="visited", archive_type="circular"),
    "gesr": VariantSpec(control="search", archive_type="reservoir"),
    "gesc": VariantSpec(control="search", archive_type="circular"),
    "akti": VariantSpec(control="none", katago_init=True),
    "akb": VariantSpec(control="none", branching=True),
    "aktib": VariantSpec(control="none", katago_init=True, branching=True),
    "gesckb": VariantSpec(control="search", archive_type="circular", branching=True),
    "gesckpcr": VariantSpec(control="search", archive_type="circular", playout_cap=True),
    "gesckfp": VariantSpec(control="search", archive_type="circular", forced_playouts=True),
    "gesc3k": VariantSpec(
        control="search", archive_type="circular",
        branching=True, playout_cap=True, forced_playouts=True,
    ),
}


@dataclass
class RunConfig:
    """Every knob of a training run; JSON-serializable field for field."""

    game_id: str = "connect4"
    variant: str = "alphazero"
    seed: int = 0
    out_dir: str | None = None

    # learning schedule
    total_steps: int = 600
    buffer_capacity: int = 2**17
    samples_per_step: int = 2**12
    minibatches_per_step: int = 8
    minibatch_size: int = 2**9
    lr: float = 1e-3
    weight_decay: float = 1e-5

    # network
    hidden_width: int = 128
    dtype: str = "float64"

    # search
    search_iterations: int = 100
    c_puct: float = 1.0
    dirichlet_alpha: float = 1.0
    dirichlet_epsilon: float = 0.25
    temperature: float = 1.0

    # self-play / search control
    sampling_moves: int = 10
    start_from_initial_prob: float = 0.1
    archive_type: str | None = None  # derived from the variant when unset
    archive_capacity: int = 10**6
    num_actors: int = 8
    num_archive_actors: int | None = None  # derived: 1 for search-state variants
    force_archive_actors: bool = False

    # optional search-control extras (switched on by variants, tunable here)
    playout_cap_small_iterations: int = 25
    playout_cap_p_full: float = 0.25
    k_forced: float = 2.0
    katago_init_max_moves: int = 6
    p_branch_alt: float = 0.05
    p_branch_value: float = 0.05
    branch_window: int = 10
    branch_sampled_actions: int = 4

    # execution
    deterministic: bool = True
    queue_capacity: int = 64
    actor_timeout_s: float = 300.0
    archive_match_period: int | None = None  # deterministic mode cadence
    checkpoint_interval: int = 25
    write_trajectory_log: bool = True
    dump_archive: bool = False

    # ------------------------------------------------------------------

    def variant_spec(self) -> VariantSpec:
        try:
            return VARIANTS[self.variant.lower()]
        except KeyError:
            raise ValueError(
                f"variant: unknown variant {self.variant!r}; "
                f"known: {sorted(VARIANTS)}"
            ) from None

    def resolved_archive_type(self) -> str | None:
        spec = self.variant_spec()
        if spec.control == "none":
            return None
        return self.archive_type or spec.archive_type

    def resolved_archive_actors(self) -> int:
        if self.num_archive_actors is not None:
            return self.num_archive_actors
        return 1 if self.variant_spec().control == "search" else 0

    def to_json_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)


def validate_config(cfg: RunConfig) -> None:
    """Raise ValueError naming the offending field on the first violation."""

    def require(ok: bool, name: str, message: str):
        if not ok:
            raise ValueError(f"{name}: {message}")

    get_game(cfg.game_id)  # raises on unknown game
    spec = cfg.variant_spec()
    require(cfg.total_steps >= 1, "total_steps", "must be >= 1")
    require(cfg.buffer_capacity >= 1, "buffer_capacity", "must be >= 1")
    require(cfg.samples_per_step >= 1, "samples_per_step", "must be >= 1")
    require(cfg.minibatches_per_step >= 1, "minibatches_per_step", "must be >= 1")
    require(cfg.minibatch_size >= 1, "minibatch_size", "must be >= 1")
    require(cfg.lr > 0, "lr", "must be positive")
    require(cfg.weight_decay >= 0, "weight_decay", "must be >= 0")
    require(cfg.hidden_width >= 1, "hidden_width", "must be >= 1")
    require(cfg.dtype in ("float32", "float64"), "dtype", "must be float32 or float64")
    require(cfg.search_iterations >= 1, "search_iterations", "must be >= 1")
    require(cfg.c_puct > 0, "c_puct", "must be positive")
    require(cfg.dirichlet_alpha > 0, "dirichlet_alpha", "must be positive")
    require(0 <= cfg.dirichlet_epsilon < 1, "dirichlet_epsilon", "must be in [0, 1)")
    require(cfg.temperature > 0, "temperature", "must be positive")
    require(cfg.sampling_moves >= 0, "sampling_moves", "must be >= 0")
    require(
        0 <= cfg.start_from_initial_prob <= 1,
        "start_from_initial_prob", "must be in [0, 1]",
    )
    require(cfg.num_actors >= 1, "num_actors", "must be >= 1")
    require(cfg.checkpoint_interval >= 1, "checkpoint_interval", "must be >= 1")
    require(cfg.queue_capacity >= 1, "queue_capacity", "must be >= 1")
    require(cfg.actor_timeout_s > 0, "actor_timeout_s", "must be positive")

    archive_type = cfg.resolved_archive_type()
    if spec.control != "none":
        require(
            archive_type in ARCHIVE_TYPES,
            "archive_type", f"must be one of {ARCHIVE_TYPES} for variant {cfg.variant}",
        )
        if spec.archive_type is not None and cfg.archive_type is not None:
            require(
                cfg.archive_type == spec.archive_type,
                "archive_type",
                f"variant {cfg.variant} pins the archive structure to "
                f"{spec.archive_type!r}",
            )
        if archive_type != "expanding":
            require(cfg.archive_capacity >= 1, "archive_capacity", "must be >= 1")

    n_archive_actors = cfg.resolved_archive_actors()
    require(n_archive_actors >= 0, "num_archive_actors", "must be >= 0")
    if spec.control == "search":
        require(
            n_archive_actors >= 1,
            "num_archive_actors",
            f"variant {cfg.variant} trains from search states and needs at "
            "least one archive actor",
        )
    elif n_archive_actors > 0 and not cfg.force_archive_actors:
        raise ValueError(
            "num_archive_actors: variant "
            f"{cfg.variant} never reads search states; set num_archive_actors=0 "
            "or force_archive_actors=true"
        )

    if spec.playout_cap:
        require(
            0 < cfg.playout_cap_p_full < 1,
            "playout_cap_p_full", "must be in (0, 1)",
        )
        require(
            1 <= cfg.playout_cap_small_iterations <= cfg.search_iterations,
            "playout_cap_small_iterations",
            "must be in [1, search_iterations]",
        )
    if spec.forced_playouts:
        require(cfg.k_forced >= 0, "k_forced", "must be >= 0")
    if spec.katago_init:
        require(cfg.katago_init_max_moves >= 0, "katago_init_max_moves", "must be >= 0")
    if spec.branching:
        require(
            0 <= cfg.p_branch_alt and 0 <= cfg.p_branch_value
            and cfg.p_branch_alt + cfg.p_branch_value <= 1,
            "p_branch_alt", "branch probabilities must be >= 0 and sum to <= 1",
        )
        require(cfg.branch_window >= 1, "branch_window", "must be >= 1")
        require(cfg.branch_sampled_actions >= 1, "branch_sampled_actions", "must be >= 1")


def build_selfplay_config(cfg: RunConfig) -> SelfplayConfig:
    spec = cfg.variant_spec()
    search = SearchConfig(
        iterations=cfg.search_iterations,
        c_puct=cfg.c_puct,
        dirichlet_alpha=cfg.dirichlet_alpha,
        dirichlet_epsilon=cfg.dirichlet_epsilon,
        temperature=cfg.temperature,
        use_root_noise=True,
        playout_cap=(
            PlayoutCapConfig(
                p_full=cfg.playout_cap_p_full,
                full_iterations=cfg.search_iterations,
                small_iterations=cfg.playout_cap_small_iterations,
            )
            if spec.playout_cap
            else None
        ),
        forced_playouts=(
            ForcedPlayoutsConfig(k_forced=cfg.k_forced) if spec.forced_playouts else None
        ),
    )
    return SelfplayConfig(
        search=search,
        sampling_moves=cfg.sampling_moves,
        start_from_initial_prob=cfg.start_from_initial_prob,
        katago_init=(
            KataGoInitConfig(max_moves=cfg.katago_init_max_moves)
            if spec.katago_init
            else None
        ),
        branching=(
            BranchingConfig(
                p_branch_alt=cfg.p_branch_alt,
                p_branch_value=cfg.p_branch_value,
                branch_window=cfg.branch_window,
                n_sampled_actions=cfg.branch_sampled_actions,
            )
            if spec.branching
            else None
        ),
    )


@dataclass
class StepReport:
    step: int
    samples: int
    trajectories: int
    loss_total: float
    loss_value: float
    loss_policy: float
    archive_size: int
    unique_archive_keys: int


class SerialTrajectorySource:
    """Deterministic schedule: actors round-robin on the learner thread;
    every ``period`` trajectories each archive actor plays one match."""

    def __init__(self, actors, archive_actors, period: int):
        self._actors = actors
        self._archive_actors = archive_actors
        self._period = max(1, period)
        self._next = 0
        self._count = 0

    def start(self):
        pass

    def stop(self):
        pass

    def next_trajectory(self, timeout: float | None = None) -> Trajectory:
        if self._archive_actors and self._count % self._period == 0:
            for actor in self._archive_actors:
                actor.play_archive_match()
        actor = self._actors[self._next]
        self._next = (self._next + 1) % len(self._actors)
        self._count += 1
        return actor.next_trajectory()


class ThreadedTrajectorySource:
    """Free-running actor threads behind a bounded queue."""

    def __init__(self, actors, archive_actors, queue_capacity: int):
        self._queue: queue.Queue[Trajectory] = queue.Queue(maxsize=queue_capacity)
        self._stop = threading.Event()
        self._threads = [
            threading.Thread(
                target=training_actor_loop, args=(actor, self._queue, self._stop),
                name=f"training-actor-{actor.actor_id}", daemon=True,
            )
            for actor in actors
        ] + [
            threading.Thread(
                target=archive_actor_loop, args=(actor, self._stop),
                name=f"archive-actor-{i}", daemon=True,
            )
            for i, actor in enumerate(archive_actors)
        ]

    def start(self):
        for thread in self._threads:
            thread.start()

    def stop(self):
        self._stop.set()
        # unblock producers waiting on a full queue
        while True:
            try:
                self._queue.get_nowait()
            except queue.Empty:
                break
        for thread in self._threads:
            thread.join(timeout=30)

    def next_trajectory(self, timeout: float | None = None) -> Trajectory:
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            raise RuntimeError(
                f"actor starvation: no trajectory arrived within {timeout}s"
            ) from None


class Learner:
    def __init__(self, cfg: RunConfig):
        validate_config(cfg)
        self.cfg = cfg
        self.game = get_game(cfg.game_id)
        self.variant = cfg.variant_spec()

        seeds = np.random.SeedSequence(cfg.seed)
        (net_seed, learner_seed, archive_seed, *actor_seeds) = seeds.spawn(
            3 + cfg.num_actors + cfg.resolved_archive_actors()
        )
        self.net = Network(
            cfg.game_id, hidden_width=cfg.hidden_width, dtype=cfg.dtype,
            rng=np.random.default_rng(net_seed),
        )
        self.rng = np.random.default_rng(learner_seed)
        self.replay = ReplayBuffer(cfg.buffer_capacity)
        self.params_box = ParamsBox(self.net.clone())

        archive_type = cfg.resolved_archive_type()
        self.archive: Archive | None = None
        if archive_type is not None:
            self.archive = Archive(
                archive_type,
                None if archive_type == "expanding" else cfg.archive_capacity,
                self.game.initial_state(),
                rng=np.random.default_rng(archive_seed),
            )
        self.archive_writes = 0  # learner-side updates, for gating checks

        selfplay_cfg = build_selfplay_config(cfg)
        training_rngs = actor_seeds[: cfg.num_actors]
        archive_rngs = actor_seeds[cfg.num_actors :]
        self.actors = [
            TrainingActor(
                i, cfg.num_actors, self.game, selfplay_cfg, self.params_box,
                np.random.default_rng(s),
                archive=self.archive if self.variant.control != "none" else None,
            )
            for i, s in enumerate(training_rngs)
        ]
        self.archive_actors = [
            ArchiveActor(self.game, selfplay_cfg, self.params_box, self.archive,
                         np.random.default_rng(s))
            for s in archive_rngs
        ]

        if cfg.deterministic:
            period = cfg.archive_match_period or cfg.num_actors
            self.source = SerialTrajectorySource(self.actors, self.archive_actors, period)
        else:
            self.source = ThreadedTrajectorySource(
                self.actors, self.archive_actors, cfg.queue_capacity
            )

        self.step_index = 0
        self.total_samples = 0
        self.total_trajectories = 0
        self._trajectory_log_fh = None

    # ------------------------------------------------------------------

    def step(self) -> StepReport:
        """One learning step: ingest, train, archive bookkeeping, publish."""
        cfg = self.cfg
        new_samples = 0
        trajectories = 0
        visited_states = []
        while new_samples < cfg.samples_per_step:
            trajectory = self.source.next_trajectory(timeout=cfg.actor_timeout_s)
            for sample in trajectory_to_samples(trajectory):
                self.replay.add(sample)
            new_samples += len(trajectory)
            trajectories += 1
            if self.variant.control == "visited":
                visited_states.extend(step.state for step in trajectory.steps)
            self._log_trajectory(trajectory)

        totals = np.zeros(3)
        for _ in range(cfg.minibatches_per_step):
            batch = self.replay.sample_batch(cfg.minibatch_size, self.rng)
            try:
                report = self.net.sgd_step(batch, cfg.lr, cfg.weight_decay)
            except FloatingPointError as exc:
                self._dump_failure_state(str(exc))
                raise RuntimeError(f"training aborted: {exc}") from exc
            totals += (report.total, report.value, report.policy)
        totals /= cfg.minibatches_per_step

        if self.variant.control == "visited":
            self.archive.update(visited_states)
            self.archive_writes += 1

        self.params_box.publish(self.net.clone())
        self.step_index += 1
        self.total_samples += new_samples
        self.total_trajectories += trajectories

        stats = self.archive.snapshot_stats() if self.archive else {"size": 0, "unique_keys": 0}
        return StepReport(
            step=self.step_index,
            samples=new_samples,
            trajectories=trajectories,
            loss_total=float(totals[0]),
            loss_value=float(totals[1]),
            loss_policy=float(totals[2]),
            archive_size=stats["size"],
            unique_archive_keys=stats["unique_keys"],
        )

    # ------------------------------------------------------------------

    def run(self) -> dict:
        """Full training run; returns the manifest (also written to disk)."""
        cfg = self.cfg
        out_dir = Path(cfg.out_dir) if cfg.out_dir else None
        checkpoints = []
        metrics_rows = []
        started = time.time()

        if out_dir:
            (out_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
            if cfg.write_trajectory_log:
                self._trajectory_log_fh = open(out_dir / "trajectories.jsonl", "w")

        last_checkpointed = -1

        def checkpoint(step: int):
            nonlocal last_checkpointed
            if not out_dir or step == last_checkpointed:
                return
            path = out_dir / "checkpoints" / f"step_{step:06d}.npz"
            self.net.save(path)
            checkpoints.append(str(path.relative_to(out_dir)))
            last_checkpointed = step

        self.source.start()
        try:
            checkpoint(0)
            for _ in range(cfg.total_steps):
                report = self.step()
                metrics_rows.append(report)
                if report.step % cfg.checkpoint_interval == 0:
                    checkpoint(report.step)
            checkpoint(cfg.total_steps)
        finally:
            self.source.stop()
            if self._trajectory_log_fh:
                self._trajectory_log_fh.close()
                self._trajectory_log_fh = None
            if out_dir:
                self._write_metrics(out_dir / "metrics.csv", metrics_rows)

        manifest = {
            "package_version": __version__,
            "game_id": cfg.game_id,
            "variant": cfg.variant,
            "seed": cfg.seed,
            "config": cfg.to_json_dict(),
            "total_steps": cfg.total_steps,
            "checkpoints": checkpoints,
            "metrics_csv": "metrics.csv" if out_dir else None,
            "trajectory_log": (
                "trajectories.jsonl" if out_dir and cfg.write_trajectory_log else None
            ),
            "samples": self.total_samples,
            "trajectories": self.total_trajectories,
            "wallclock_s": round(time.time() - started, 3),
        }
        if out_dir:
            if cfg.dump_archive and self.archive is not None:
                with open(out_dir / "archive_snapshot.json", "w") as fh:
                    json.dump(self.archive.snapshot_dump(), fh)
                manifest["archive_snapshot"] = "archive_snapshot.json"
            with open(out_dir / "manifest.json", "w") as fh:
                json.dump(manifest, fh, indent=2, sort_keys=True)
        return manifest

    # ------------------------------------------------------------------

    @staticmethod
    def _write_metrics(path: Path, rows: list[StepReport]) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(METRICS_COLUMNS)
            for r in rows:
                writer.writerow(
                    [
                        r.step,
                        f"{r.loss_total:.10g}",
                        f"{r.loss_value:.10g}",
                        f"{r.loss_policy:.10g}",
                        r.samples,
                        r.trajectories,
                        r.archive_size,
                        r.unique_archive_keys,
                    ]
                )

    def _log_trajectory(self, trajectory: Trajectory) -> None:
        if self._trajectory_log_fh is None:
            return
        record = {
            "id": trajectory.trajectory_id,
            "origin": trajectory.origin,
            "start_ply": trajectory.start_state.ply,
            "length": len(trajectory),
            "z": trajectory.outcome.value,
            "states": [
                [step.state.ply, state_key(step.state)] for step in trajectory.steps
            ],
        }
        self._trajectory_log_fh.write(json.dumps(record) + "\n")

    def _dump_failure_state(self, reason: str) -> None:
        if not self.cfg.out_dir:
            return
        out_dir = Path(self.cfg.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        self.net.save(out_dir / "failure_params.npz")
        with open(out_dir / "failure.json", "w") as fh:
            json.dump(
                {
                    "reason": reason,
                    "step": self.step_index,
                    "net_step": self.net.step,
                    "samples": self.total_samples,
                },
                fh,
                indent=2,
            )


def run_training(cfg: RunConfig) -> dict:
    """Spawn the configured run end to end and return its manifest."""
    return Learner(cfg).run()
