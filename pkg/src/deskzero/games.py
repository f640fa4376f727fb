"""Two-player zero-sum board games behind one small interface.

Ships Connect Four (7x6, the main experiment game) and Tic-Tac-Toe (3x3,
small enough to verify against brute-force enumeration). States are
immutable values: ``apply_action`` returns a fresh state and never touches
its input, so archives, search trees, and worker threads can alias states
freely without copying or locking.

Conventions used everywhere downstream:
  * players are 1 and 2; player 1 moves first,
  * outcomes are stored from player 1's perspective (+1 / 0 / -1),
  * actions are flat integers in ``[0, action_space_size)``.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, slots=True)
class Outcome:
    """Terminal game result from player 1's perspective (+1 win, 0 draw, -1 loss)."""

    value: int

    def for_player(self, player: int) -> int:
        """Result from ``player``'s perspective (zero-sum: player 2 sees -value)."""
        return self.value if player == 1 else -self.value


@dataclass(frozen=True, slots=True)
class GameState:
    """One immutable board position plus whose turn it is.

    ``board`` is a flat row-major tuple of cell contents (0 empty, 1, 2).
    For Connect Four row 0 is the bottom row. ``ply`` equals the number of
    pieces on the board. ``outcome`` is None while the game is live; it is
    computed once, when the state is created, so terminal checks are O(1).
    """

    game_id: str
    board: tuple[int, ...]
    to_move: int
    ply: int
    outcome: Outcome | None

    def is_terminal(self) -> bool:
        return self.outcome is not None


class Game:
    """Rules of one game. Subclasses fill in the class attributes and hooks."""

    game_id: str
    rows: int
    cols: int
    action_space_size: int
    max_game_length: int

    def initial_state(self) -> GameState:
        board = (0,) * (self.rows * self.cols)
        return GameState(self.game_id, board, to_move=1, ply=0, outcome=None)

    def legal_actions(self, state: GameState) -> list[int]:
        if state.outcome is not None:
            raise ValueError(f"legal_actions called on terminal {self.game_id} state")
        return self._legal_actions(state)

    def apply_action(self, state: GameState, action: int) -> GameState:
        if state.outcome is not None:
            raise ValueError(f"apply_action called on terminal {self.game_id} state")
        cell = self._placement_cell(state, action)
        if cell is None:
            raise ValueError(f"illegal action {action} in {self.game_id} state")
        board = list(state.board)
        board[cell] = state.to_move
        board = tuple(board)
        outcome = self._outcome_after(board, cell, state.to_move, state.ply + 1)
        return GameState(
            self.game_id,
            board,
            to_move=3 - state.to_move,
            ply=state.ply + 1,
            outcome=outcome,
        )

    def render(self, state: GameState) -> str:
        """Text board for logs: '.', 'X' (player 1), 'O' (player 2), top row first."""
        glyphs = {0: ".", 1: "X", 2: "O"}
        lines = []
        for r in range(self.rows - 1, -1, -1):
            row = state.board[r * self.cols : (r + 1) * self.cols]
            lines.append("".join(glyphs[c] for c in row))
        return "\n".join(lines)

    # hooks -----------------------------------------------------------------

    def _legal_actions(self, state: GameState) -> list[int]:
        raise NotImplementedError

    def _placement_cell(self, state: GameState, action: int) -> int | None:
        """Flat board index the mover's piece lands on, or None if illegal."""
        raise NotImplementedError

    def _outcome_after(
        self, board: tuple[int, ...], cell: int, mover: int, ply: int
    ) -> Outcome | None:
        raise NotImplementedError


def _windows_through_cell(
    rows: int, cols: int, length: int
) -> tuple[tuple[tuple[int, ...], ...], ...]:
    """For each cell, every straight ``length``-in-a-row window containing it."""
    all_windows = []
    for r in range(rows):
        for c in range(cols):
            for dr, dc in ((0, 1), (1, 0), (1, 1), (1, -1)):
                rr, cc = r + dr * (length - 1), c + dc * (length - 1)
                if 0 <= rr < rows and 0 <= cc < cols:
                    all_windows.append(
                        tuple((r + dr * i) * cols + (c + dc * i) for i in range(length))
                    )
    by_cell: list[list[tuple[int, ...]]] = [[] for _ in range(rows * cols)]
    for window in all_windows:
        for cell in window:
            by_cell[cell].append(window)
    return tuple(tuple(ws) for ws in by_cell)


class ConnectFour(Game):
    game_id = "connect4"
    rows = 6
    cols = 7
    action_space_size = 7
    max_game_length = 42

    _WINDOWS = _windows_through_cell(6, 7, 4)
    _TOP_ROW_START = 5 * 7

    def _legal_actions(self, state: GameState) -> list[int]:
        board = state.board
        top = self._TOP_ROW_START
        return [c for c in range(7) if board[top + c] == 0]

    def _placement_cell(self, state: GameState, action: int) -> int | None:
        if not 0 <= action < 7:
            return None
        board = state.board
        for r in range(6):
            cell = r * 7 + action
            if board[cell] == 0:
                return cell
        return None

    def _outcome_after(self, board, cell, mover, ply):
        for window in self._WINDOWS[cell]:
            a, b, c, d = window
            if board[a] == board[b] == board[c] == board[d] == mover:
                return Outcome(1 if mover == 1 else -1)
        if ply == self.max_game_length:
            return Outcome(0)
        return None


class TicTacToe(Game):
    game_id = "tictactoe"
    rows = 3
    cols = 3
    action_space_size = 9
    max_game_length = 9

    _LINES = _windows_through_cell(3, 3, 3)

    def _legal_actions(self, state: GameState) -> list[int]:
        board = state.board
        return [i for i in range(9) if board[i] == 0]

    def _placement_cell(self, state: GameState, action: int) -> int | None:
        if 0 <= action < 9 and state.board[action] == 0:
            return action
        return None

    def _outcome_after(self, board, cell, mover, ply):
        for line in self._LINES[cell]:
            a, b, c = line
            if board[a] == board[b] == board[c] == mover:
                return Outcome(1 if mover == 1 else -1)
        if ply == self.max_game_length:
            return Outcome(0)
        return None


_REGISTRY: dict[str, Game] = {g.game_id: g for g in (ConnectFour(), TicTacToe())}


def get_game(game_id: str) -> Game:
    try:
        return _REGISTRY[game_id]
    except KeyError:
        raise ValueError(
            f"unknown game_id {game_id!r}; known: {sorted(_REGISTRY)}"
        ) from None


def game_for(state: GameState) -> Game:
    return _REGISTRY[state.game_id]


def initial_state(game_id: str) -> GameState:
    return get_game(game_id).initial_state()


def legal_actions(state: GameState) -> list[int]:
    return game_for(state).legal_actions(state)


def apply_action(state: GameState, action: int) -> GameState:
    return game_for(state).apply_action(state, action)


def terminal_outcome(state: GameState) -> Outcome | None:
    return state.outcome


def state_key(state: GameState) -> str:
    """Canonical hashable identifier: encodes game, side to move, and board."""
    return f"{state.game_id}|{state.to_move}|{''.join(map(str, state.board))}"


def render(state: GameState) -> str:
    return game_for(state).render(state)
