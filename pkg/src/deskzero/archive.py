"""Restart archive: the pool of nonterminal states self-play can begin from.

Three structural variants share one interface:

  expanding   unbounded append; every offered state stays forever
  circular    fixed-size ring holding the most recently offered states
  reservoir   fixed-size uniform sample over everything ever offered
              (classic algorithm-R replacement: the i-th offer survives
              with probability capacity / n_offered)

Duplicates are allowed on purpose: a state offered twice is twice as likely
to be drawn, so frequently seen states are revisited more often. A counter
of state keys is maintained incrementally so size/uniqueness diagnostics
stay O(1) no matter how large the archive grows.

The archive is the one structure shared between writer and readers at run
time, so every public method takes the internal lock. Readers see either
the pre- or post-update view of a slot, never a torn state; concurrent
writers are serialized.
"""

from __future__ import annotations

import threading
from collections import Counter

import numpy as np

from .games import GameState, state_key

ARCHIVE_TYPES = ("expanding", "circular", "reservoir")


class Archive:
    def __init__(
        self,
        archive_type: str,
        capacity: int | None,
        initial_state: GameState,
        rng: np.random.Generator | None = None,
    ):
        archive_type = archive_type.lower()
        if archive_type not in ARCHIVE_TYPES:
            raise ValueError(
                f"unknown archive_type {archive_type!r}; expected one of {ARCHIVE_TYPES}"
            )
        if archive_type != "expanding":
            if capacity is None or capacity < 1:
                raise ValueError(f"{archive_type} archive needs capacity >= 1")
        if initial_state.is_terminal():
            raise ValueError("archive cannot be seeded with a terminal state")
        self.archive_type = archive_type
        self.capacity = capacity if archive_type != "expanding" else None
        # the reservoir replacement draw needs its own randomness; updates are
        # serialized under the lock so one generator serves all writers
        self._rng = rng or np.random.default_rng()
        self._lock = threading.Lock()
        self._items: list[GameState] = [initial_state]
        self._head = 0  # circular only: index of the oldest item
        self._key_counts: Counter[str] = Counter([state_key(initial_state)])
        # the seed state counts as the first offered item, so n starts at 1
        self.n_offered = 1

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)

    def size(self) -> int:
        return len(self)

    def sample(self, rng: np.random.Generator) -> GameState:
        """Uniform draw over stored items, duplicates included."""
        with self._lock:
            return self._items[rng.integers(0, len(self._items))]

    def update(self, new_states) -> None:
        """Offer states in order, applying the variant's replacement rule."""
        with self._lock:
            items = self._items
            counts = self._key_counts
            if self.archive_type == "expanding":
                for state in new_states:
                    self._check_nonterminal(state)
                    items.append(state)
                    counts[state_key(state)] += 1
                    self.n_offered += 1
            elif self.archive_type == "circular":
                capacity = self.capacity
                for state in new_states:
                    self._check_nonterminal(state)
                    if len(items) < capacity:
                        items.append(state)
                    else:
                        self._forget(items[self._head])
                        items[self._head] = state
                        self._head = (self._head + 1) % capacity
                    counts[state_key(state)] += 1
                    self.n_offered += 1
            else:  # reservoir
                capacity = self.capacity
                for state in new_states:
                    self._check_nonterminal(state)
                    if len(items) < capacity:
                        items.append(state)
                        counts[state_key(state)] += 1
                    else:
                        i = int(self._rng.integers(0, self.n_offered))
                        if i < capacity:
                            self._forget(items[i])
                            items[i] = state
                            counts[state_key(state)] += 1
                    self.n_offered += 1

    def _forget(self, state: GameState) -> None:
        key = state_key(state)
        remaining = self._key_counts[key] - 1
        if remaining:
            self._key_counts[key] = remaining
        else:
            del self._key_counts[key]

    @staticmethod
    def _check_nonterminal(state: GameState) -> None:
        if state.is_terminal():
            raise ValueError("terminal state offered to archive")

    def snapshot_stats(self) -> dict:
        with self._lock:
            return {
                "size": len(self._items),
                "n_offered": self.n_offered,
                "unique_keys": len(self._key_counts),
            }

    def snapshot_dump(self) -> list[tuple[str, int]]:
        """State keys with multiplicities, most common first (offline analysis)."""
        with self._lock:
            return self._key_counts.most_common()

    def contents(self) -> list[GameState]:
        """Stored states, oldest offer first for the bounded variants."""
        with self._lock:
            return self._items[self._head :] + self._items[: self._head]


def initialize_archive(
    archive_type: str,
    capacity: int | None,
    initial_state: GameState,
    rng: np.random.Generator | None = None,
) -> Archive:
    return Archive(archive_type, capacity, initial_state, rng=rng)
