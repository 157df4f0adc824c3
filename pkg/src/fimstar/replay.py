"""Ring-buffer replay storage with disjoint batch sampling for meta steps."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

__all__ = ["Batch", "ReplayBuffer"]


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray


class ReplayBuffer:
    """Fixed-capacity ring of transitions stored as preallocated arrays."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity)
        self.size = 0
        self.cursor = 0

    def push(self, s, a, r, s2, done) -> None:
        i = self.cursor
        self.states[i] = s
        self.actions[i] = a
        self.rewards[i] = r
        self.next_states[i] = s2
        self.dones[i] = float(done)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def _gather(self, idx) -> Batch:
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx],
                     self.next_states[idx], self.dones[idx])

    def sample_indices(self, gen: np.random.Generator, batch_size: int) -> np.ndarray:
        if self.size < batch_size:
            raise ValueError("not enough stored transitions to sample")
        return gen.choice(self.size, size=batch_size, replace=False)

    def gather(self, idx) -> Batch:
        return self._gather(np.asarray(idx))

    def sample(self, gen: np.random.Generator, batch_size: int) -> Batch:
        return self._gather(self.sample_indices(gen, batch_size))

    def sample_excluding(self, gen: np.random.Generator, batch_size: int,
                         exclude) -> Batch:
        """Batch drawn from stored entries outside `exclude` (disjoint split)."""
        pool = np.setdiff1d(np.arange(self.size), np.asarray(exclude))
        if len(pool) < batch_size:
            raise ValueError("not enough stored transitions for a disjoint batch")
        return self._gather(gen.choice(pool, size=batch_size, replace=False))

    def sample_disjoint(self, gen: np.random.Generator, n_train: int, n_val: int):
        """Two batches with no shared transitions, for the meta train/val split."""
        if self.size < n_train + n_val:
            raise ValueError("not enough stored transitions for disjoint batches")
        idx = gen.choice(self.size, size=n_train + n_val, replace=False)
        return self._gather(idx[:n_train]), self._gather(idx[n_train:])
