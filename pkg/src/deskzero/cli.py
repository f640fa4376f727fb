"""Command-line entry point: train, evaluate, tournament, stats, emit-curves,
validate-config.

Configs are JSON files whose keys are RunConfig fields; command-line flags
override file values. A training manifest can be passed wherever a config is
expected (its embedded config is used), so any finished run can be repeated
from its manifest alone. The DESKZERO_OUT environment variable supplies a
default output root when --out is omitted.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .evaluation import (
    emit_curves,
    evaluate_checkpoint,
    evaluate_run,
    tournament,
    unique_states_by_depth,
    value_loss_report,
)
from .learner import RunConfig, build_selfplay_config, run_training, validate_config
from .model import load_checkpoint


def load_config_file(path) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]  # a run manifest: reuse its embedded config
    return data


def build_run_config(args) -> RunConfig:
    data = load_config_file(args.config) if args.config else {}
    overrides = {
        "seed": args.seed,
        "out_dir": _resolve_out(args.out, "train"),
        "variant": args.variant,
        "game_id": args.game,
        "num_actors": args.actors,
        "num_archive_actors": args.archive_actors,
        "total_steps": args.steps,
    }
    if args.deterministic is not None:
        overrides["deterministic"] = args.deterministic
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_json_dict(data)


def _resolve_out(out, verb):
    if out is not None:
        return out
    root = os.environ.get("DESKZERO_OUT")
    if root:
        return str(Path(root) / verb)
    return None


def _parse_levels(text) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def cmd_train(args) -> int:
    cfg = build_run_config(args)
    if cfg.out_dir is None:
        print("error: train needs --out (or DESKZERO_OUT)", file=sys.stderr)
        return 2
    validate_config(cfg)
    manifest = run_training(cfg)
    print(
        f"trained {cfg.variant} on {cfg.game_id} for {cfg.total_steps} steps; "
        f"manifest at {Path(cfg.out_dir) / 'manifest.json'}"
    )
    return 0 if manifest else 1


def cmd_evaluate(args) -> int:
    rng = np.random.default_rng(args.seed or 0)
    levels = _parse_levels(args.levels)
    if args.run:
        rows = evaluate_run(
            args.run, levels=levels, matches_per_checkpoint=args.matches,
            base_iterations=args.base_iterations, seed=args.seed or 0,
        )
        print(f"evaluated {len(rows)} checkpoint/level cells -> {args.run}/eval.csv")
        return 0
    if not args.checkpoint:
        print("error: evaluate needs --checkpoint or --run", file=sys.stderr)
        return 2
    if args.base_iterations is None:
        print("error: evaluate --checkpoint needs --base-iterations", file=sys.stderr)
        return 2
    evaluation = evaluate_checkpoint(
        args.checkpoint, levels, args.matches, args.base_iterations, rng
    )
    out_dir = Path(_resolve_out(args.out, "evaluate") or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "evaluation.csv"
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "matches", "win_rate"])
        for level in levels:
            writer.writerow([level, args.matches, f"{evaluation.rates[level]:.10g}"])
    _write_command_manifest(out_dir, "evaluate", vars(args))
    for level in levels:
        print(f"level {level}: win rate {evaluation.rates[level]:.3f}")
    return 0


def cmd_tournament(args) -> int:
    rng = np.random.default_rng(args.seed or 0)
    ckpts_a = args.checkpoints_a.split(",")
    ckpts_b = args.checkpoints_b.split(",")
    rate, games = tournament(
        ckpts_a, ckpts_b, iterations=args.iterations, rng=rng,
        names=(args.label_a, args.label_b),
    )
    out_dir = Path(_resolve_out(args.out, "tournament") or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "tournament.csv"
    new_file = not out_path.exists()
    with open(out_path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(["algo_a", "algo_b", "step", "games", "win_rate"])
        writer.writerow(
            [args.label_a, args.label_b, args.step, games, f"{rate:.10g}"]
        )
    _write_command_manifest(out_dir, "tournament", vars(args))
    print(f"{args.label_a} vs {args.label_b}: win rate {rate:.3f} over {games} games")
    return 0


def cmd_stats(args) -> int:
    out_dir = Path(_resolve_out(args.out, "stats") or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    did_anything = False
    if args.trajectory_log:
        histogram = unique_states_by_depth(args.trajectory_log)
        with open(out_dir / "depth_histogram.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["depth", "unique_states"])
            for depth, count in histogram.items():
                writer.writerow([depth, count])
        print(
            f"{sum(histogram.values())} unique states over "
            f"{len(histogram)} depths -> {out_dir / 'depth_histogram.csv'}"
        )
        did_anything = True
    if args.value_loss_run:
        run_dir = Path(args.value_loss_run)
        with open(run_dir / "manifest.json") as fh:
            manifest = json.load(fh)
        cfg = RunConfig.from_json_dict(manifest["config"])
        checkpoint = args.checkpoint or str(run_dir / manifest["checkpoints"][-1])
        net = load_checkpoint(checkpoint, expect_game_id=cfg.game_id)
        report = value_loss_report(
            net,
            build_selfplay_config(cfg),
            n_games=args.games,
            mode=args.mode,
            rng=np.random.default_rng(args.seed or 0),
        )
        report["algorithm"] = cfg.variant
        report["checkpoint"] = str(checkpoint)
        with open(out_dir / f"value_loss_{args.mode}.json", "w") as fh:
            json.dump(report, fh, indent=2)
        print(
            f"value loss ({args.mode}) = {report['mse']:.4f} "
            f"over {report['n_states']} states"
        )
        did_anything = True
    if not did_anything:
        print("error: stats needs --trajectory-log and/or --value-loss-run",
              file=sys.stderr)
        return 2
    _write_command_manifest(out_dir, "stats", vars(args))
    return 0


def cmd_emit_curves(args) -> int:
    runs = args.runs.split(",")
    out_path = args.out or "curves.csv"
    rows = emit_curves(runs, out_path)
    print(f"wrote {len(rows)} curve rows across {len(runs)} runs -> {out_path}")
    return 0


def cmd_validate_config(args) -> int:
    data = load_config_file(args.config)
    cfg = RunConfig.from_json_dict(data)
    validate_config(cfg)
    print(f"{args.config}: valid ({cfg.variant} on {cfg.game_id})")
    return 0


def _write_command_manifest(out_dir: Path, verb: str, arg_dict: dict) -> None:
    record = {
        "command": verb,
        "args": {k: v for k, v in arg_dict.items() if not callable(v)},
    }
    with open(out_dir / f"{verb}_manifest.json", "w") as fh:
        json.dump(record, fh, indent=2, default=str)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deskzero",
        description="Desk-scale self-play training with archive search control.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    train = sub.add_parser("train", help="run a training session")
    train.add_argument("--config", help="JSON config (or a previous manifest)")
    train.add_argument("--seed", type=int)
    train.add_argument("--out", help="output directory (default $DESKZERO_OUT/train)")
    train.add_argument("--variant")
    train.add_argument("--game")
    train.add_argument("--steps", type=int)
    train.add_argument("--actors", type=int)
    train.add_argument("--archive-actors", dest="archive_actors", type=int)
    group = train.add_mutually_exclusive_group()
    group.add_argument("--deterministic", dest="deterministic",
                       action="store_true", default=None)
    group.add_argument("--threaded", dest="deterministic", action="store_false")
    train.set_defaults(func=cmd_train)

    ev = sub.add_parser("evaluate", help="play matches against the reference opponent")
    ev.add_argument("--checkpoint")
    ev.add_argument("--run", help="evaluate every checkpoint of a run directory")
    ev.add_argument("--levels", default="10")
    ev.add_argument("--matches", type=int, default=20)
    ev.add_argument("--base-iterations", dest="base_iterations", type=int)
    ev.add_argument("--seed", type=int)
    ev.add_argument("--out")
    ev.set_defaults(func=cmd_evaluate)

    tour = sub.add_parser("tournament", help="head-to-head checkpoint tournament")
    tour.add_argument("--checkpoints-a", dest="checkpoints_a", required=True)
    tour.add_argument("--checkpoints-b", dest="checkpoints_b", required=True)
    tour.add_argument("--iterations", type=int, required=True)
    tour.add_argument("--label-a", dest="label_a", default="a")
    tour.add_argument("--label-b", dest="label_b", default="b")
    tour.add_argument("--step", type=int, default=-1)
    tour.add_argument("--seed", type=int)
    tour.add_argument("--out")
    tour.set_defaults(func=cmd_tournament)

    stats = sub.add_parser("stats", help="state-coverage and value-loss diagnostics")
    stats.add_argument("--trajectory-log", dest="trajectory_log")
    stats.add_argument("--value-loss-run", dest="value_loss_run",
                       help="run directory for the value-loss report")
    stats.add_argument("--checkpoint", help="checkpoint override for --value-loss-run")
    stats.add_argument("--games", type=int, default=500)
    stats.add_argument("--mode", choices=("visited", "search"), default="visited")
    stats.add_argument("--seed", type=int)
    stats.add_argument("--out")
    stats.set_defaults(func=cmd_stats)

    curves = sub.add_parser("emit-curves", help="aggregate eval grids across seeds")
    curves.add_argument("--runs", required=True, help="comma-separated run dirs")
    curves.add_argument("--out")
    curves.set_defaults(func=cmd_emit_curves)

    check = sub.add_parser("validate-config", help="check a config file")
    check.add_argument("--config", required=True)
    check.set_defaults(func=cmd_validate_config)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
