"""deskzero: desk-scale AlphaZero self-play training with archive search control.

Library layout:
  games       game rules (Connect Four, Tic-Tac-Toe) behind one interface
  mcts        PUCT search, root noise, playout caps, forced playouts
  model       numpy policy-value network, loss, SGD, checkpoints
  replay      FIFO experience replay buffer
  archive     expanding / circular / reservoir restart archives
  selfplay    trajectory generation, training and archive actors
  learner     training orchestration, metrics, manifests
  solver      UCT reference opponent with game-theoretic value proving
  evaluation  matches, learning curves, AUC, tournaments, diagnostics
  cli         train / evaluate / tournament / stats / emit-curves commands
"""

__version__ = "0.1.0"

from .games import (
    GameState,
    Outcome,
    apply_action,
    get_game,
    initial_state,
    legal_actions,
    render,
    state_key,
    terminal_outcome,
)

__all__ = [
    "GameState",
    "Outcome",
    "apply_action",
    "get_game",
    "initial_state",
    "legal_actions",
    "render",
    "state_key",
    "terminal_outcome",
    "__version__",
]


def __getattr__(name):
    # heavier subsystems load lazily so `import deskzero` stays cheap
    import importlib

    for module, names in {
        "mcts": ("SearchConfig", "SearchResult", "run_search"),
        "model": ("Network", "TrainingSample", "encode", "load_checkpoint"),
        "archive": ("Archive", "initialize_archive"),
        "replay": ("ReplayBuffer",),
        "learner": ("RunConfig", "run_training", "validate_config"),
        "solver": ("make_reference_opponent", "solver_search"),
        "selfplay": ("SelfplayConfig", "generate_trajectory"),
    }.items():
        if name in names:
            return getattr(importlib.import_module(f".{module}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
