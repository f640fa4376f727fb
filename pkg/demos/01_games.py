"""Tour of the game layer: states, moves, outcomes, rendering.

Run with: python demos/01_games.py
"""

import numpy as np

from deskzero.games import (
    apply_action,
    get_game,
    initial_state,
    legal_actions,
    render,
    state_key,
    terminal_outcome,
)

# States are immutable values: applying an action returns a new state and
# the original is untouched.
s0 = initial_state("connect4")
s1 = apply_action(s0, 3)
print("After player 1 drops in column 3 (X = player 1, O = player 2):")
print(render(s1))
print(f"to_move={s1.to_move}  ply={s1.ply}  terminal={s1.is_terminal()}")
print(f"original board still empty: {s0.ply == 0}")

# A quick scripted game: player 1 builds a horizontal four on the bottom row.
state = s0
for column in (0, 0, 1, 1, 2, 2, 3):
    state = apply_action(state, column)
print("\nPlayer 1 wins with columns 0-3:")
print(render(state))
print(f"outcome for player 1: {terminal_outcome(state).for_player(1)}")
print(f"outcome for player 2: {terminal_outcome(state).for_player(2)}")

# Legal actions always come back sorted; full columns disappear.
state = initial_state("connect4")
for _ in range(3):
    state = apply_action(state, 6)
    state = apply_action(state, 6)
print(f"\ncolumn 6 is full, legal columns now: {legal_actions(state)}")

# Keys identify positions exactly (board + side to move), which the archives
# and the coverage diagnostics rely on.
print(f"\nstate_key of the empty board: {state_key(initial_state('tictactoe'))}")

# Random playouts terminate and produce one of the three outcomes.
rng = np.random.default_rng(0)
game = get_game("tictactoe")
tally = {1: 0, 0: 0, -1: 0}
for _ in range(2000):
    s = game.initial_state()
    while not s.is_terminal():
        acts = game.legal_actions(s)
        s = game.apply_action(s, acts[rng.integers(len(acts))])
    tally[s.outcome.value] += 1
print(f"\n2000 random tic-tac-toe playouts -> X wins {tally[1]}, "
      f"draws {tally[0]}, O wins {tally[-1]}")
