"""Brute-force partially-persistent set used as ground truth in tests.

Keeps the whole update log and answers any query by replay. Snapshots
every few hundred versions speed replay up without changing any answer.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right

from .core import DELETE, INSERT


class SetOracle:
    def __init__(self, initial_values=(), snapshot_every: int = 256):
        self.initial = frozenset(initial_values)
        self.log: list[tuple[int, object]] = []  # (kind, value), index = version - 1
        self.snapshot_every = snapshot_every
        self._snapshots: dict[int, frozenset] = {0: self.initial}
        self._current = set(self.initial)

    def apply(self, kind: int, value) -> int:
        if kind == INSERT:
            self._current.add(value)
        else:
            self._current.discard(value)
        self.log.append((kind, value))
        v = len(self.log)
        if v % self.snapshot_every == 0:
            self._snapshots[v] = frozenset(self._current)
        return v

    def insert(self, value) -> int:
        return self.apply(INSERT, value)

    def delete(self, value) -> int:
        return self.apply(DELETE, value)

    @property
    def version(self) -> int:
        return len(self.log)

    def set_at(self, v: int) -> list:
        """Sorted contents of version v."""
        if not 0 <= v <= len(self.log):
            raise ValueError(f"version {v} out of range")
        if v == len(self.log):
            return sorted(self._current)
        base = v - (v % self.snapshot_every)
        while base not in self._snapshots:
            base -= self.snapshot_every
        state = set(self._snapshots[base])
        for kind, value in self.log[base:v]:
            if kind == INSERT:
                state.add(value)
            else:
                state.discard(value)
        return sorted(state)

    def search(self, v: int, x, *, predecessor: bool = False,
               strict: bool = False):
        vals = self.set_at(v)
        if predecessor:
            i = bisect_left(vals, x) if strict else bisect_right(vals, x)
            return vals[i - 1] if i > 0 else None
        i = bisect_right(vals, x) if strict else bisect_left(vals, x)
        return vals[i] if i < len(vals) else None

    def range(self, v: int, x=None, y=None) -> list:
        vals = self.set_at(v)
        lo = 0 if x is None else bisect_left(vals, x)
        hi = len(vals) if y is None else bisect_right(vals, y)
        return vals[lo:hi]
