"""PUCT search in action: tactics, noise, playout caps, forced playouts.

Run with: python demos/02_search.py
"""

import numpy as np

from deskzero.games import apply_action, get_game, initial_state, render
from deskzero.mcts import (
    ForcedPlayoutsConfig,
    PlayoutCapConfig,
    SearchConfig,
    run_search,
    sample_playout_cap,
)

game = get_game("connect4")
uniform = np.full(7, 1 / 7)
net = lambda state: (uniform, 0.0)  # priors uniform, value 0: search on its own

# Player 2 owns the bottom row at columns 4,5,6; only column 3 saves player 1.
state = initial_state("connect4")
for a in (0, 4, 0, 5, 1, 6):
    state = apply_action(state, a)
print(render(state))

rng = np.random.default_rng(0)
for iters in (16, 64, 400):
    result = run_search(state, net, SearchConfig(iterations=iters), rng)
    print(f"{iters:4d} iterations -> policy {np.round(result.policy, 2)} "
          f"(best column {int(np.argmax(result.policy))}, "
          f"root value {result.root_value:+.2f})")
print("more search concentrates the policy on the forced block (column 3)\n")

# Root Dirichlet noise makes self-play exploratory; evaluation turns it off.
noisy = SearchConfig(iterations=100, use_root_noise=True,
                     dirichlet_alpha=1.0, dirichlet_epsilon=0.25)
policies = [run_search(initial_state("connect4"), net, noisy, rng).policy
            for _ in range(3)]
for i, p in enumerate(policies):
    print(f"noisy opening search {i}: {np.round(p, 2)}")
print("same position, different noise draws -> different exploration\n")

# Playout cap randomization: most searches run cheap, a fraction at full
# budget; cheap ones keep only their value targets.
cap = PlayoutCapConfig(p_full=0.25, full_iterations=100, small_iterations=10)
draws = [sample_playout_cap(cap, rng) for _ in range(12)]
print("playout cap draws (iterations, full?):", draws)

# Forced playouts guarantee every root action a visit floor during training
# searches, then prune the unjustified visits from the policy target.
fp = SearchConfig(iterations=200, use_root_noise=True,
                  forced_playouts=ForcedPlayoutsConfig(k_forced=2.0))
result = run_search(state, net, fp, rng)
print(f"\nforced-playout search on the tactic: visits {result.root_visits}, "
      f"pruned policy {np.round(result.policy, 3)}")
print("forced exploration happened, but the pruned target stays sharp")
