"""Bounded FIFO experience store with uniform sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Transition:
    """One environment step; done marks true termination, truncated a
    time-limit cut (which still bootstraps)."""

    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    done: bool
    truncated: bool = False


class ReplayBuffer:
    """Ring buffer: once full, every push evicts the oldest element."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self._storage: list[Transition] = []
        self._cursor = 0

    @property
    def count(self) -> int:
        return len(self._storage)

    def push(self, t: Transition) -> "ReplayBuffer":
        if self._storage and (
            t.s.shape != self._storage[0].s.shape or t.a.shape != self._storage[0].a.shape
        ):
            raise ValueError("transition dimensions do not match buffer contents")
        if len(self._storage) < self.capacity:
            self._storage.append(t)
        else:
            self._storage[self._cursor] = t
            self._cursor = (self._cursor + 1) % self.capacity
        return self

    def sample(self, n: int, rng: np.random.Generator) -> list[Transition]:
        """n uniform draws with replacement; refuses when empty."""
        if n < 1:
            raise ValueError("n must be >= 1")
        if self.count == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self.count, size=n)
        return [self._storage[i] for i in idx]

    def __iter__(self):
        return iter(self._storage)
