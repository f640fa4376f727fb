"""End-to-end training: a small tic-tac-toe run, then a strength check.

Takes a couple of minutes. Run with: python demos/05_train_tictactoe.py
"""

import tempfile
import time
from pathlib import Path

import numpy as np

from deskzero.evaluation import make_network_agent, make_random_agent, play_pair
from deskzero.games import get_game
from deskzero.learner import RunConfig, run_training
from deskzero.model import load_checkpoint

out_dir = Path(tempfile.mkdtemp(prefix="deskzero_demo_"))
cfg = RunConfig(
    game_id="tictactoe",
    variant="alphazero",
    seed=3,
    total_steps=40,
    buffer_capacity=4096,
    samples_per_step=256,
    minibatches_per_step=8,
    minibatch_size=64,
    lr=1e-2,
    hidden_width=64,
    search_iterations=50,
    sampling_moves=9,
    num_actors=4,
    checkpoint_interval=20,
    out_dir=str(out_dir),
)

print(f"training {cfg.variant} on {cfg.game_id} for {cfg.total_steps} steps...")
t0 = time.time()
manifest = run_training(cfg)
print(f"done in {time.time() - t0:.0f}s; artifacts in {out_dir}")
print(f"checkpoints: {manifest['checkpoints']}")

game = get_game("tictactoe")
rng = np.random.default_rng(9)
random_agent = make_random_agent()

for rel in (manifest["checkpoints"][0], manifest["checkpoints"][-1]):
    net = load_checkpoint(out_dir / rel)
    agent = make_network_agent(net, iterations=100)
    scores = []
    for _ in range(50):
        scores.extend(play_pair(agent, random_agent, game, rng))
    print(f"{rel}: mean score vs random over 100 games = {np.mean(scores):.3f}")

print("\nthe trained checkpoint should sit well above the untrained one;")
print(f"metrics per learning step are in {out_dir / 'metrics.csv'}")
