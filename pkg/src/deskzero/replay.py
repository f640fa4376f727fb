"""Fixed-size FIFO experience replay with uniform batch sampling."""

from __future__ import annotations

from collections import Counter

import numpy as np

from .model import TrainingSample


class ReplayBuffer:
    """Holds the most recent ``capacity`` training samples.

    Implemented as a ring buffer so batch sampling is O(batch) regardless of
    capacity; eviction is strictly oldest-first. Owned and accessed by the
    learner only (trajectory ingestion happens on the learner's step loop),
    so no locking is needed. Sampling is uniform with replacement over the
    current contents.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._samples: list[TrainingSample] = []
        self._write_pos = 0
        self._trajectory_counts: Counter[int] = Counter()
        self.total_added = 0

    def __len__(self) -> int:
        return len(self._samples)

    def add(self, sample: TrainingSample) -> None:
        if len(self._samples) < self.capacity:
            self._samples.append(sample)
        else:
            evicted = self._samples[self._write_pos]
            count = self._trajectory_counts[evicted.trajectory_id] - 1
            if count:
                self._trajectory_counts[evicted.trajectory_id] = count
            else:
                del self._trajectory_counts[evicted.trajectory_id]
            self._samples[self._write_pos] = sample
            self._write_pos = (self._write_pos + 1) % self.capacity
        self._trajectory_counts[sample.trajectory_id] += 1
        self.total_added += 1

    def sample_batch(self, batch_size: int, rng: np.random.Generator) -> list[TrainingSample]:
        if not self._samples:
            raise ValueError("cannot sample from an empty replay buffer")
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        indices = rng.integers(0, len(self._samples), size=batch_size)
        return [self._samples[i] for i in indices]

    def distinct_trajectories(self) -> int:
        """How many different trajectories contribute samples right now."""
        return len(self._trajectory_counts)

    def contents(self) -> list[TrainingSample]:
        """Current samples, oldest first (test and diagnostics helper)."""
        return self._samples[self._write_pos :] + self._samples[: self._write_pos]
