"""The proving reference opponent: exact labels emerge from random playouts.

Run with: python demos/04_solver.py
"""

import time

import numpy as np

from deskzero.games import apply_action, initial_state, render
from deskzero.solver import make_reference_opponent, root_proven_value, solver_search

# With enough iterations the solver proves tic-tac-toe is a draw.
t0 = time.time()
label = root_proven_value(initial_state("tictactoe"), 100_000,
                          rng=np.random.default_rng(0))
names = {1: "win", 0: "draw", -1: "loss"}
print(f"tic-tac-toe from the empty board is a proven {names[label]} "
      f"for the mover ({time.time() - t0:.1f}s)")

# Tactical positions prove almost instantly.
state = initial_state("tictactoe")
for a in (0, 3, 1, 4):  # X threatens 0-1-2
    state = apply_action(state, a)
move = solver_search(state, 1000, rng=np.random.default_rng(1))
print(f"X to move with two in a row: solver plays cell {move} (the win)")

# Difficulty levels just scale the per-move budget.
for level in (1, 10, 100, 1000):
    opponent = make_reference_opponent(level, base_iterations=50)
    print(f"level {level:4d}x -> {opponent.iterations} iterations per move")

# Watch two difficulty levels fight on Connect Four.
strong = make_reference_opponent(100, 10)   # 1000 iterations
weak = make_reference_opponent(1, 10)       # 10 iterations
rng = np.random.default_rng(2)
state = initial_state("connect4")
while not state.is_terminal():
    agent = strong if state.to_move == 1 else weak
    state = apply_action(state, agent(state, rng))
print("\nstrong (X) vs weak (O) final position:")
print(render(state))
print(f"outcome for the strong side: {state.outcome.for_player(1):+d}")
