"""Public partially-persistent ordered set.

Versions are integers: 0 is the initial state, every insert or delete
creates the next one, and any version stays queryable. The version axis
is split into epochs: each epoch freezes its parameters for an initial
set of size N and absorbs up to ceil(c*N) updates, after which the
current set is extracted and a fresh epoch built from it (global
rebuilding). Frozen epochs are fully drained and immutable. Small epochs
(where the guaranteed minimum set size would not fill one legal
rectangle) skip the tree and keep a single flat record log.
"""

from __future__ import annotations

from bisect import bisect_right
from typing import Iterator, Optional

from .blockstore import ABOVE_ALL, BELOW_ALL, BlockStore, StoreConfig
from .core import DELETE, INSERT, Rectangle, UpdateRecord, alive_set
from .tree import (
    BepsTree,
    InvariantViolation,
    Params,
    POLICY_OVERFLOW,
    POLICY_PATH,
    compute_params,
)


class InvalidVersionError(ValueError):
    """Version outside [0, current]."""


class PurgedVersionError(InvalidVersionError):
    """Version was dropped by purge_before."""


class BlockedArray:
    """Dense append-only array of slots, B per block; the block directory
    is held in memory (it is one address per B entries)."""

    __slots__ = ("addrs", "count")

    def __init__(self):
        self.addrs: list[int] = []
        self.count = 0

    def append(self, store: BlockStore, slot: tuple) -> None:
        cap = store.config.block_capacity_B
        if self.count % cap == 0:
            self.addrs.append(store.allocate())
        blk = store.write(self.addrs[-1])
        blk.records.append(slot)
        self.count += 1

    def get(self, store: BlockStore, i: int) -> tuple:
        cap = store.config.block_capacity_B
        return store.read(self.addrs[i // cap]).records[i % cap]

    def set_last(self, store: BlockStore, slot: tuple) -> None:
        cap = store.config.block_capacity_B
        blk = store.write(self.addrs[-1])
        blk.records[(self.count - 1) % cap] = slot


class Epoch:
    """One frozen-parameter instance covering versions [version_lo, ...).

    Tree mode routes queries through the per-version root index; flat
    mode is a single rectangle holding base records plus a chronological
    update log.
    """

    _next_tag = 0

    def __init__(self, store: BlockStore, params: Params, policy: str,
                 version_lo: int):
        self.store = store
        self.params = params
        self.policy = policy
        self.version_lo = version_lo
        self.update_count = 0
        self.capacity = max(
            1, _ceil_frac(params.rebuild_fraction, params.initial_size)
        )
        self.frozen = False
        self.tag = Epoch._next_tag
        Epoch._next_tag += 1
        self.tree: Optional[BepsTree] = None
        self.flat_rect: Optional[Rectangle] = None
        self.root_index = BlockedArray()
        self._last_root = 0

    # -- construction --------------------------------------------------

    @classmethod
    def create(cls, store: BlockStore, version_lo: int, values: list,
               block_capacity: int, epsilon: float, rebuild_fraction: float,
               policy: str) -> "Epoch":
        params = compute_params(
            len(values), block_capacity, epsilon, rebuild_fraction
        )
        epoch = cls(store, params, policy, version_lo)
        store.current_owner = epoch.tag
        min_size = (1.0 - rebuild_fraction) * params.initial_size
        if min_size < 4 * params.rect_budget:
            epoch.flat_rect = Rectangle.create(
                store, BELOW_ALL, ABOVE_ALL, version_lo, values
            )
        else:
            epoch.tree = BepsTree.build_initial(
                store, params, policy, values, version_lo
            )
            epoch.root_index.append(store, (epoch.tree.root_addr, 0, 0, 0))
            epoch._last_root = epoch.tree.root_addr
        return epoch

    @property
    def is_flat(self) -> bool:
        return self.tree is None

    def needs_rebuild(self) -> bool:
        return self.update_count >= self.capacity

    # -- updates ---------------------------------------------------------

    def apply(self, rec: UpdateRecord) -> None:
        assert not self.frozen
        if self.is_flat:
            self.flat_rect.records.append(self.store, rec)
            self.flat_rect.write_header(self.store)
        else:
            self.root_index.append(self.store, (self.tree.root_addr, 0, 0, 0))
            self._last_root = self.tree.root_addr
            self.tree.insert_update(rec)
            self._sync_root()
        self.update_count += 1

    def _sync_root(self) -> None:
        if not self.is_flat and self.tree.root_addr != self._last_root:
            self.root_index.set_last(self.store, (self.tree.root_addr, 0, 0, 0))
            self._last_root = self.tree.root_addr

    def _root_for(self, v: int) -> int:
        return self.root_index.get(self.store, v - self.version_lo)[0]

    # -- queries ---------------------------------------------------------

    def _rect_alive(self, rect: Rectangle, v: int, lo, hi) -> list:
        """Alive values at v within [lo, hi), restricted to one rectangle."""
        state: dict = {}
        for rec in rect.records.iter_records(self.store):
            if lo <= rec[0] <= hi and rec[1] <= v:
                state[rec[0]] = rec[2]
        return sorted(x for x, kind in state.items() if kind == INSERT)

    def _locate_ready(self, v: int, x, current_version: int):
        """Locate the rectangle for (x, v) via the version's root и make
        sure its record list is complete (actualizing open rectangles
        through the current tree)."""
        rect, _ = self.tree.locate(self._root_for(v), v, x)
        if rect.is_open and not self.frozen:
            self.tree.actualize(rect, current_version)
            self._sync_root()
            rect = Rectangle.load(self.store, rect.addr)
        return rect

    def search(self, v: int, x, current_version: int, *, predecessor: bool,
               strict: bool):
        if self.is_flat:
            alive = self._rect_alive(self.flat_rect, v, BELOW_ALL, ABOVE_ALL)
            return _pick(alive, x, predecessor, strict)
        probe = x
        for _ in range(64):  # spanning guarantees two rectangles suffice
            rect = self._locate_ready(v, probe, current_version)
            alive = (
                self._rect_alive(rect, v, rect.value_lo, x)
                if predecessor
                else self._rect_alive(rect, v, x, ABOVE_ALL)
            )
            hit = _pick(alive, x, predecessor, strict)
            if hit is not None:
                return hit
            if predecessor:
                if rect.value_lo is BELOW_ALL:
                    return None
                probe = _JustBelow(rect.value_lo)
            else:
                if rect.value_hi is ABOVE_ALL:
                    return None
                probe = rect.value_hi
        raise InvariantViolation("search walked too many rectangles")

    def range(self, v: int, x, y, current_version: int) -> list:
        if self.is_flat:
            alive = self._rect_alive(self.flat_rect, v, x, y)
            return alive
        out: list = []
        probe = x
        while True:
            rect = self._locate_ready(v, probe, current_version)
            out.extend(self._rect_alive(rect, v, probe, y))
            if rect.value_hi is ABOVE_ALL or rect.value_hi > y:
                return out
            probe = rect.value_hi

    def extract_current(self, current_version: int) -> list:
        """All alive values at the current version (drains every open
        rectangle on the way)."""
        if self.is_flat:
            return self._rect_alive(
                self.flat_rect, current_version, BELOW_ALL, ABOVE_ALL
            )
        return self.range(
            current_version, BELOW_ALL, ABOVE_ALL, current_version
        )

    def freeze(self) -> None:
        self.frozen = True
        if not self.is_flat:
            self.tree.unpin_root()


class _JustBelow:
    """Probe that sorts immediately below a boundary value, used to step
    into the left neighbor rectangle ([lo, hi) ranges make the boundary
    itself belong to the right side)."""

    __slots__ = ("bound",)

    def __init__(self, bound):
        self.bound = bound

    def __lt__(self, other):
        if isinstance(other, _JustBelow):
            return self.bound < other.bound
        return not other < self.bound  # self < other  iff  other >= bound

    def __gt__(self, other):
        if isinstance(other, _JustBelow):
            return self.bound > other.bound
        return other < self.bound

    def __le__(self, other):
        return not self.__gt__(other)

    def __ge__(self, other):
        return not self.__lt__(other)

    def __eq__(self, other):
        return isinstance(other, _JustBelow) and self.bound == other.bound


def _pick(alive: list, x, predecessor: bool, strict: bool):
    """Boundary selection over a sorted alive list."""
    if predecessor:
        for val in reversed(alive):
            if val < x or (not strict and val == x):
                return val
        return None
    for val in alive:
        if val > x or (not strict and val == x):
            return val
    return None


def _ceil_frac(frac: float, n: int) -> int:
    v = frac * n
    iv = int(v)
    return iv if iv == v else iv + 1


class PersistentSet:
    """Partially-persistent ordered set with I/O-accounted storage.

    insert/delete advance and return the current version; search and
    range accept any version from 0 up to the current one. Values only
    need a total order (tests use ints; file-backed stores require
    ints).
    """

    def __init__(self, initial_values=(), *, block_capacity: int = 64,
                 epsilon: float = 0.5, rebuild_fraction: float = 0.5,
                 cache_frames: Optional[int] = None, policy: str = POLICY_OVERFLOW,
                 store_path: Optional[str] = None):
        values = list(initial_values)
        for a, b in zip(values, values[1:]):
            if not a < b:
                raise ValueError("initial values must be sorted and distinct")
        probe_params = compute_params(
            max(1, len(values)), block_capacity, epsilon, rebuild_fraction
        )
        if cache_frames is None:
            cache_frames = probe_params.min_cache_frames + 8
        elif cache_frames < probe_params.min_cache_frames:
            raise ValueError(
                f"cache_frames must be >= {probe_params.min_cache_frames} "
                f"for this geometry"
            )
        self.store = BlockStore(
            StoreConfig(block_capacity, cache_frames, store_path)
        )
        self.store.current_owner = None
        self.block_capacity = block_capacity
        self.epsilon = epsilon
        self.rebuild_fraction = rebuild_fraction
        self.policy = policy
        self.version = 0
        self.epochs: list[Epoch] = [
            Epoch.create(
                self.store, 0, values, block_capacity, epsilon,
                rebuild_fraction, policy,
            )
        ]
        self.rebuild_count = 0

    # -- updates -----------------------------------------------------------

    @property
    def live(self) -> Epoch:
        return self.epochs[-1]

    def insert(self, x) -> int:
        return self._update(x, INSERT)

    def delete(self, x) -> int:
        return self._update(x, DELETE)

    def _update(self, x, kind: int) -> int:
        self.version += 1
        self.live.apply(UpdateRecord(x, self.version, kind, 0))
        if self.live.needs_rebuild():
            self._global_rebuild()
        return self.version

    def _global_rebuild(self) -> None:
        live = self.live
        values = live.extract_current(self.version)
        live.freeze()
        self.epochs.append(
            Epoch.create(
                self.store, self.version, values, self.block_capacity,
                self.epsilon, self.rebuild_fraction, self.policy,
            )
        )
        self.rebuild_count += 1

    # -- queries -----------------------------------------------------------

    def _epoch_for(self, v: int) -> Epoch:
        if not 0 <= v <= self.version:
            raise InvalidVersionError(f"version {v} outside [0, {self.version}]")
        los = [e.version_lo for e in self.epochs]
        if v < los[0]:
            raise PurgedVersionError(f"version {v} was purged")
        return self.epochs[bisect_right(los, v) - 1]

    def search(self, v: int, x, *, predecessor: bool = False,
               strict: bool = False):
        """Successor of x in version v (min y >= x), or with flags the
        predecessor / strict variants. None when no such value."""
        return self._epoch_for(v).search(
            v, x, self.version, predecessor=predecessor, strict=strict
        )

    def contains(self, v: int, x) -> bool:
        return self.search(v, x) == x

    def range(self, v: int, x=None, y=None) -> list:
        """All values of version v in [x, y], increasing; None bounds are
        open."""
        lo = BELOW_ALL if x is None else x
        hi = ABOVE_ALL if y is None else y
        if hi < lo:
            raise ValueError("range bounds out of order")
        return self._epoch_for(v).range(v, lo, hi, self.version)

    # -- maintenance ---------------------------------------------------------

    def purge_before(self, v: int) -> int:
        """Free every epoch entirely below version v; returns the number of
        blocks reclaimed. v must not exceed the live epoch's first
        version."""
        if v > self.live.version_lo:
            raise InvalidVersionError(
                f"version {v} is inside the live epoch"
            )
        freed = 0
        keep: list[Epoch] = []
        for i, epoch in enumerate(self.epochs):
            hi = (
                self.epochs[i + 1].version_lo
                if i + 1 < len(self.epochs)
                else None
            )
            if hi is not None and hi <= v:
                freed += self.store.free_owner(epoch.tag)
            else:
                keep.append(epoch)
        self.epochs = keep
        return freed

    def stats(self) -> dict:
        """Counters snapshot for harnesses."""
        live = self.live
        out = {
            "io": self.store.stats.snapshot(),
            "live_blocks": self.store.live_blocks,
            "version": self.version,
            "epochs": len(self.epochs),
            "rebuilds": self.rebuild_count,
            "epoch_initial_size": live.params.initial_size,
            "flat": live.is_flat,
        }
        if not live.is_flat:
            out["height"] = live.tree.height
            out["open_rects"] = live.tree.open_rect_count
            out["pending_peak"] = live.tree.pending_peak
        else:
            out["height"] = 0
            out["open_rects"] = 1
            out["pending_peak"] = 0
        return out

    def check_invariants(self) -> None:
        live = self.live
        if not live.is_flat:
            live.tree.check_invariants()

    def close(self) -> None:
        for epoch in self.epochs:
            if not epoch.is_flat:
                epoch.tree.flush_root()
        self.store.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
