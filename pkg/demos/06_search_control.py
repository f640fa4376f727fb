"""Search control at a glance: where do trajectories start, and what does
that do to state coverage and trajectory counts?

Takes a few minutes. Run with: python demos/06_search_control.py
"""

import csv
import tempfile
import time
from pathlib import Path

from deskzero.evaluation import unique_states_by_depth
from deskzero.learner import RunConfig, run_training

root = Path(tempfile.mkdtemp(prefix="deskzero_control_"))
common = dict(
    game_id="connect4",
    seed=5,
    total_steps=8,
    buffer_capacity=8192,
    samples_per_step=512,
    minibatches_per_step=4,
    minibatch_size=128,
    hidden_width=64,
    search_iterations=25,
    sampling_moves=10,
    num_actors=4,
    checkpoint_interval=8,
)

runs = {}
for variant, extra in [
    ("alphazero", {}),
    ("gesc", dict(start_from_initial_prob=0.01, archive_capacity=20_000,
                  num_archive_actors=1)),
]:
    out = root / variant
    t0 = time.time()
    run_training(RunConfig(variant=variant, out_dir=str(out), **common, **extra))
    runs[variant] = out
    print(f"{variant}: trained {common['total_steps']} steps "
          f"in {time.time() - t0:.0f}s")

print("\ntrajectories completed per learning step:")
for variant, out in runs.items():
    with open(out / "metrics.csv") as fh:
        rows = list(csv.DictReader(fh))
    counts = [int(r["trajectories"]) for r in rows]
    print(f"  {variant:9s} {counts}  (mean {sum(counts) / len(counts):.1f})")

print("\nunique visited states by depth (archive restarts reach deeper):")
histograms = {
    variant: unique_states_by_depth(out / "trajectories.jsonl")
    for variant, out in runs.items()
}
max_depth = max(max(h) for h in histograms.values())
print("  depth: " + " ".join(f"{d:4d}" for d in range(0, max_depth + 1, 2)))
for variant, histogram in histograms.items():
    row = " ".join(f"{histogram.get(d, 0):4d}" for d in range(0, max_depth + 1, 2))
    print(f"  {variant:9s} {row}")

deep = lambda h: sum(count for depth, count in h.items() if depth > 10)
print(f"\nunique states past the action-sampling horizon (depth > 10): "
      f"alphazero={deep(histograms['alphazero'])}, gesc={deep(histograms['gesc'])}")
