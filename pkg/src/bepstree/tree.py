"""Buffered tree over the open rectangles.

Structure in one paragraph: the current version's alive values live in
open rectangles that tile the value axis; a search tree T of fan-out at
most 2*delta routes values to rectangles, and every internal node carries
a buffer of at most 2*delta*flush_batch not-yet-applied updates. Updates
enter the root buffer (pinned in cache, so for free) and move down in
batches of flush_batch, either when a buffer overflows or, under the path
policy, along one root-to-leaf path every flush_batch-th update. Once a
rectangle has absorbed rect_budget updates it is finalized: drained,
closed at the current version, and replaced by one or two fresh open
rectangles (splitting at the median alive value, or first consuming the
neighbor with the deepest common ancestor when too few values remain).
Structural changes copy the affected root-to-leaf path so that the old
root keeps answering all older versions; buffers travel to the copies.

Node layout in the store: a chain of blocks holding one header slot
(height, degree, buffer count), one slot per child (lower bound, address,
leaf flag), one closing upper-bound slot, then the buffered records.
A node is O(1) blocks since 2*delta*(flush_batch+1) = O(B).
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right, insort
from dataclasses import dataclass
from typing import Iterator, Optional

from .blockstore import ABOVE_ALL, BELOW_ALL, BlockStore
from .core import (
    BlockedList,
    Rectangle,
    UpdateRecord,
    merge,
    merge_lists,
    _REASON_BUDGET,
    _REASON_MERGE_VICTIM,
)

CHILD_NODE = 0
CHILD_RECT = 1

POLICY_OVERFLOW = "overflow"
POLICY_PATH = "path"


class InvariantViolation(RuntimeError):
    """A structural invariant failed at runtime."""


def _ceil_exact(x: float) -> int:
    """Ceiling that forgives float noise just below an integer."""
    r = round(x)
    if abs(x - r) < 1e-9:
        return int(r)
    return int(math.ceil(x))


@dataclass(frozen=True)
class Params:
    """Frozen per-epoch parameters.

    branch:      half the maximum fan-out (nodes split at 2*branch)
    height_cap:  upper bound on internal nodes per root-to-leaf path
    flush_batch: records moved per flush step
    rect_budget: updates a rectangle absorbs before it is finalized
    """

    initial_size: int
    block_capacity: int
    epsilon: float
    rebuild_fraction: float
    branch: int
    height_cap: int
    flush_batch: int
    rect_budget: int

    @property
    def max_degree(self) -> int:
        return 2 * self.branch

    @property
    def buffer_cap(self) -> int:
        return 2 * self.branch * self.flush_batch

    @property
    def node_slot_count(self) -> int:
        # header + children + upper bound + buffer (+1 transient overfill)
        return 2 + self.max_degree + self.buffer_cap + 1

    @property
    def min_cache_frames(self) -> int:
        root_chain = -(-self.node_slot_count // self.block_capacity)
        return root_chain + 4


def compute_params(n_initial: int, block_capacity: int, epsilon: float,
                   rebuild_fraction: float = 0.5) -> Params:
    if n_initial < 0:
        raise ValueError("initial size must be >= 0")
    if block_capacity < 2:
        raise ValueError("block capacity must be >= 2")
    if not (0.0 < epsilon < 1.0):
        raise ValueError("epsilon must be in (0, 1)")
    if not (0.0 < rebuild_fraction < 1.0):
        raise ValueError("rebuild fraction must be in (0, 1)")
    branch = _ceil_exact(block_capacity**epsilon)
    flush_batch = _ceil_exact(block_capacity ** (1.0 - epsilon))
    if n_initial <= 1:
        log_term = 0
    else:
        log_term = _ceil_exact(math.log(n_initial) / math.log(branch))
    height_cap = 1 + log_term
    rect_budget = height_cap * 2 * branch * flush_batch
    return Params(
        initial_size=n_initial,
        block_capacity=block_capacity,
        epsilon=epsilon,
        rebuild_fraction=rebuild_fraction,
        branch=branch,
        height_cap=height_cap,
        flush_batch=flush_batch,
        rect_budget=rect_budget,
    )


class Node:
    """Decoded internal node. entries[i] = (lo, addr, kind) covers values
    [lo, entries[i+1].lo or upper). Buffer is (value, version)-sorted."""

    __slots__ = ("addr", "height", "entries", "upper", "buffer", "chain")

    def __init__(self, addr, height, entries, upper, buffer, chain):
        self.addr = addr
        self.height = height
        self.entries = entries
        self.upper = upper
        self.buffer = buffer
        self.chain = chain

    @property
    def degree(self) -> int:
        return len(self.entries)

    @property
    def lower(self):
        return self.entries[0][0]

    def child_slot(self, x) -> int:
        """Index of the child whose range contains x."""
        los = [e[0] for e in self.entries]
        return bisect_right(los, x) - 1

    def child_slot_ending_at(self, bound) -> int:
        """Index of the child whose range ends exactly at bound."""
        los = [e[0] for e in self.entries]
        return bisect_left(los, bound) - 1

    def child_range(self, idx):
        lo = self.entries[idx][0]
        hi = self.entries[idx + 1][0] if idx + 1 < len(self.entries) else self.upper
        return lo, hi

    def buffer_span(self, lo, hi) -> tuple[int, int]:
        """Half-open index range of buffered records with value in [lo, hi)."""
        i = bisect_left(self.buffer, lo, key=lambda r: r[0])
        j = bisect_left(self.buffer, hi, key=lambda r: r[0])
        return i, j

    def pending_counts(self) -> list[int]:
        """Buffered records per child slot."""
        counts = [0] * self.degree
        for idx in range(self.degree):
            lo, hi = self.child_range(idx)
            i, j = self.buffer_span(lo, hi)
            counts[idx] = j - i
        return counts


@dataclass
class FinalizeEvent:
    """Instrumentation for one rectangle closure."""

    rect_addr: int
    reason: int
    received: int
    base_count: int
    alive: int
    spanning: int
    new_rects: int
    allocs: int


class BepsTree:
    """One epoch's tree over its open rectangles.

    The tree owns the current root (whose chain stays pinned while the
    epoch is live), performs all buffer movement and rectangle surgery,
    and records closed-rectangle and flush instrumentation for the test
    and bench harnesses. Queries against old roots only navigate; all
    buffer draining goes through the current root.
    """

    def __init__(self, store: BlockStore, params: Params, policy: str):
        if policy not in (POLICY_OVERFLOW, POLICY_PATH):
            raise ValueError(f"unknown flush policy {policy!r}")
        self.store = store
        self.params = params
        self.policy = policy
        self.root_addr = 0
        self._pinned: set[int] = set()
        self._updates_since_flush = 0
        # Decoded copy of the pinned root; store blocks are refreshed
        # lazily since pinned frames are never transferred anyway.
        self._root_node: Optional[Node] = None
        self._root_dirty = False
        # instrumentation
        self.finalize_log: list[FinalizeEvent] = []
        self.pending_peak = 0
        self.flush_rounds = 0
        self.open_rect_count = 0

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------

    @classmethod
    def build_initial(cls, store: BlockStore, params: Params, policy: str,
                      values: list, version_lo: int) -> "BepsTree":
        """Pack sorted distinct values into rectangles of roughly six
        budgets each and build a balanced tree bottom-up, one write per
        block."""
        tree = cls(store, params, policy)
        budget = params.rect_budget
        n = len(values)
        if n < 4 * budget:
            raise ValueError("initial set too small for tree mode")
        k = max(1, round(n / (6 * budget)))
        guard = 0
        while n // k < 4 * budget:
            k -= 1
            guard += 1
            assert guard < 64, "no valid rectangle count"
        while -(-n // k) >= 8 * budget:
            k += 1
            guard += 1
            assert guard < 64, "no valid rectangle count"

        base = n // k
        extra = n % k
        entries = []
        pos = 0
        for i in range(k):
            size = base + (1 if i < extra else 0)
            chunk = values[pos : pos + size]
            pos += size
            lo = BELOW_ALL if i == 0 else chunk[0]
            hi = ABOVE_ALL if i == k - 1 else values[pos]
            rect = Rectangle.create(store, lo, hi, version_lo, chunk)
            entries.append((lo, rect.addr, CHILD_RECT))

        height = 1
        max_deg = params.max_degree
        while True:
            m = len(entries)
            if m <= max_deg - 1:
                root = tree._new_node(height, entries, ABOVE_ALL, [])
                break
            q = -(-m // (max_deg - 1))
            group_base = m // q
            group_extra = m % q
            next_entries = []
            pos = 0
            for g in range(q):
                size = group_base + (1 if g < group_extra else 0)
                group = entries[pos : pos + size]
                upper = (
                    entries[pos + size][0] if pos + size < m else ABOVE_ALL
                )
                pos += size
                node = tree._new_node(height, group, upper, [])
                next_entries.append((group[0][0], node.addr, CHILD_NODE))
            entries = next_entries
            height += 1
        if root.height > params.height_cap:
            raise InvariantViolation("initial tree exceeds height cap")
        tree._set_root(root.addr)
        tree.open_rect_count = k
        return tree

    # ------------------------------------------------------------------
    # node codec
    # ------------------------------------------------------------------

    def read_node(self, addr: int) -> Node:
        if addr == self.root_addr and self._root_node is not None:
            return self._root_node
        slots = []
        chain = []
        a = addr
        while a:
            blk = self.store.read(a)
            chain.append(a)
            slots.extend(blk.records)
            a = blk.next
        height, degree, buf_count, _ = slots[0]
        entries = [tuple(s[:3]) for s in slots[1 : 1 + degree]]
        upper = slots[1 + degree][0]
        buffer = [UpdateRecord(*s) for s in slots[2 + degree : 2 + degree + buf_count]]
        return Node(addr, height, entries, upper, buffer, chain)

    def write_node(self, node: Node) -> None:
        if self._root_node is not None and node.addr == self.root_addr:
            assert node is self._root_node
            self._root_dirty = True
            return
        self._write_node_raw(node)

    def _write_node_raw(self, node: Node) -> None:
        slots = [(node.height, node.degree, len(node.buffer), 0)]
        slots.extend(node.entries)
        slots.append((node.upper, 0, 0, 0))
        slots.extend(node.buffer)
        cap = self.store.config.block_capacity_B
        needed = max(1, -(-len(slots) // cap))
        chain = list(node.chain)
        pinned_node = self.root_addr == node.addr
        while len(chain) < needed:
            a = self.store.allocate()
            chain.append(a)
            if pinned_node:
                self._pin(a)
        surplus, chain = chain[needed:], chain[:needed]
        for a in surplus:
            if a in self._pinned:
                self._unpin(a)
            self.store.free(a)
        for i, a in enumerate(chain):
            blk = self.store.write(a)
            blk.records = slots[i * cap : (i + 1) * cap]
            blk.next = chain[i + 1] if i + 1 < needed else 0
        node.chain = chain

    def _new_node(self, height, entries, upper, buffer) -> Node:
        addr = self.store.allocate()
        node = Node(addr, height, list(entries), upper, list(buffer), [addr])
        self.write_node(node)
        return node

    # -- root pinning (the root buffer lives in internal memory) ----------

    def _pin(self, addr: int) -> None:
        self.store.pin(addr)
        self._pinned.add(addr)

    def _unpin(self, addr: int) -> None:
        self.store.unpin(addr)
        self._pinned.discard(addr)

    def flush_root(self) -> None:
        """Push the decoded root back into its store blocks."""
        if self._root_node is not None and self._root_dirty:
            self._write_node_raw(self._root_node)
            self._root_dirty = False

    def _set_root(self, addr: int) -> None:
        self.flush_root()
        self._root_node = None
        for a in list(self._pinned):
            self._unpin(a)
        self.root_addr = addr
        node = self.read_node(addr)
        for a in node.chain:
            self._pin(a)
        self._root_node = node
        self._root_dirty = False

    def unpin_root(self) -> None:
        """Release the root pin (epoch freeze)."""
        self.flush_root()
        self._root_node = None
        for a in list(self._pinned):
            self._unpin(a)

    # ------------------------------------------------------------------
    # navigation
    # ------------------------------------------------------------------

    def locate(self, root_addr: int, version: int, x) -> tuple[Rectangle, list]:
        """Descend from the given (possibly old) root to the rectangle
        whose value range contains x. Returns the rectangle and the path
        as (node, child_index) pairs."""
        path = []
        node = self.read_node(root_addr)
        while True:
            idx = node.child_slot(x)
            path.append((node, idx))
            lo, addr, kind = node.entries[idx]
            if kind == CHILD_RECT:
                rect = Rectangle.load(self.store, addr)
                if len(path) > self.params.height_cap:
                    raise InvariantViolation("path longer than height cap")
                if not rect.spans_version(version):
                    raise InvariantViolation(
                        f"located rect {rect!r} does not span version {version}"
                    )
                return rect, path
            node = self.read_node(addr)

    def _path_to_open_rect(self, rect: Rectangle) -> list:
        """Path in the *current* tree to an open rectangle (all open
        rectangles are leaves of the current tree)."""
        path = []
        node = self.read_node(self.root_addr)
        while True:
            idx = node.child_slot(rect.value_lo)
            path.append((node, idx))
            lo, addr, kind = node.entries[idx]
            if kind == CHILD_RECT:
                if addr != rect.addr:
                    raise InvariantViolation(
                        "open rectangle not found under current root"
                    )
                return path
            node = self.read_node(addr)

    def _descend_edge(self, entry, leftmost: bool) -> Rectangle:
        lo, addr, kind = entry
        while kind == CHILD_NODE:
            node = self.read_node(addr)
            lo, addr, kind = node.entries[0 if leftmost else -1]
        return Rectangle.load(self.store, addr)

    def open_leaf_count(self) -> int:
        return sum(1 for _ in self.iter_leaf_entries())

    def iter_leaf_entries(self) -> Iterator[tuple]:
        stack = [self.root_addr]
        while stack:
            node = self.read_node(stack.pop())
            for entry in reversed(node.entries):
                if entry[2] == CHILD_RECT:
                    yield entry
                else:
                    stack.append(entry[1])

    def iter_nodes(self, root_addr: Optional[int] = None) -> Iterator[tuple]:
        """Yield (node, lo, hi) for every internal node under a root."""
        root = root_addr if root_addr is not None else self.root_addr
        stack = [(root, BELOW_ALL, ABOVE_ALL)]
        while stack:
            addr, lo, hi = stack.pop()
            node = self.read_node(addr)
            yield node, lo, hi
            for idx, (elo, eaddr, kind) in enumerate(node.entries):
                if kind == CHILD_NODE:
                    clo, chi = node.child_range(idx)
                    stack.append((eaddr, clo, chi))

    @property
    def height(self) -> int:
        return self.read_node(self.root_addr).height

    # ------------------------------------------------------------------
    # buffered updates
    # ------------------------------------------------------------------

    def insert_update(self, rec: UpdateRecord) -> None:
        """Buffer one update in the root (no I/O beyond the pinned root)
        and run the epoch's flushing policy."""
        root = self.read_node(self.root_addr)
        insort(root.buffer, rec, key=lambda r: (r[0], r[1]))
        self.write_node(root)
        if self.policy == POLICY_OVERFLOW:
            if len(root.buffer) > self.params.buffer_cap:
                self._flush_overflow(root, rec.version)
        else:
            self._updates_since_flush += 1
            if self._updates_since_flush >= self.params.flush_batch:
                self._updates_since_flush = 0
                self._flush_path(rec.version)

    def _extract_child_run(self, node: Node, idx: int, limit: int) -> list:
        """Remove up to limit records destined for child idx from node's
        buffer (smallest values first) and persist the node."""
        lo, hi = node.child_range(idx)
        i, j = node.buffer_span(lo, hi)
        j = min(j, i + limit)
        batch = node.buffer[i:j]
        if batch:
            del node.buffer[i:j]
            self.write_node(node)
        return batch

    def _deliver(self, entry, batch: list, version: int) -> Optional[Node]:
        """Move a sorted batch into a child. Returns the child node when it
        is internal, None when the batch went into a rectangle (finalizing
        it if the budget is reached)."""
        lo, addr, kind = entry
        if kind == CHILD_NODE:
            child = self.read_node(addr)
            if batch:
                child.buffer = list(
                    _merge_sorted(child.buffer, batch)
                )
                self.write_node(child)
            return child
        rect = Rectangle.load(self.store, addr)
        rect.merge_updates(self.store, batch)
        if rect.received_updates >= self.params.rect_budget:
            self.finalize(rect, version)
        return None

    def _flush_overflow(self, node: Node, version: int) -> None:
        """Move flush_batch records to the fullest child, recursing down a
        single path while buffers overflow."""
        F = self.params.flush_batch
        while True:
            counts = node.pending_counts()
            idx = counts.index(max(counts))
            batch = self._extract_child_run(node, idx, F)
            self._note_pending(node)
            child = self._deliver(node.entries[idx], batch, version)
            if child is None:
                return
            self._note_pending(child)
            if len(child.buffer) <= self.params.buffer_cap:
                return
            node = child

    def _flush_path(self, version: int) -> None:
        """Flush along one entire root-to-leaf path, each node sending up
        to flush_batch records toward the child owning the most pending
        records (ties to the leftmost)."""
        F = self.params.flush_batch
        self.flush_rounds += 1
        node = self.read_node(self.root_addr)
        while True:
            self._note_pending(node)
            counts = node.pending_counts()
            idx = counts.index(max(counts))
            batch = self._extract_child_run(node, idx, F)
            self._note_pending(node)
            child = self._deliver(node.entries[idx], batch, version)
            if child is None:
                return
            if len(child.buffer) > self.params.buffer_cap:
                raise InvariantViolation("buffer overflow under path policy")
            node = child

    def _note_pending(self, node: Node) -> None:
        counts = node.pending_counts()
        if counts:
            peak = max(counts)
            if peak > self.pending_peak:
                self.pending_peak = peak

    # ------------------------------------------------------------------
    # actualize
    # ------------------------------------------------------------------

    def actualize(self, rect: Rectangle, version: int) -> None:
        """Drain every buffered update destined for an open rectangle into
        it, then finalize if the budget is reached."""
        self._drain_into(rect)
        if rect.received_updates >= self.params.rect_budget:
            self.finalize(rect, version)

    def _drain_into(self, rect: Rectangle) -> None:
        """Top-down drain along the current root-to-leaf path: carried
        updates are merged with each buffer's relevant run and finally
        with the rectangle's list."""
        assert rect.is_open
        path = self._path_to_open_rect(rect)
        carried = BlockedList()
        for node, _ in path:
            i, j = node.buffer_span(rect.value_lo, rect.value_hi)
            batch = node.buffer[i:j]
            if batch:
                del node.buffer[i:j]
                self.write_node(node)
                carried = merge(self.store, carried, batch)
        if carried.count:
            total = rect.records.count + carried.count
            rect.records = merge_lists(self.store, rect.records, carried)
            assert rect.records.count == total
            rect.write_header(self.store)

    # ------------------------------------------------------------------
    # finalize
    # ------------------------------------------------------------------

    def finalize(self, rect: Rectangle, version: int) -> None:
        """Close a drained rectangle at the current version and replace it
        with one or two fresh open rectangles via path copying."""
        budget = self.params.rect_budget
        allocs_before = self.store.stats.allocs
        self._drain_into(rect)
        alive = rect.alive_values(self.store, version)
        k = len(alive)
        if k >= 10 * budget:
            raise InvariantViolation(f"rect alive count {k} >= 10R")

        replaced: dict[int, list[Rectangle]] = {}
        lo, hi = rect.value_lo, rect.value_hi
        victim = None
        if k < 4 * budget:
            victim = self._merge_partner(rect)
            self._drain_into(victim)
            v_alive = victim.alive_values(self.store, version)
            victim.close(self.store, version, _REASON_MERGE_VICTIM)
            self._log_close(victim, _REASON_MERGE_VICTIM, len(v_alive), 0, 0)
            if victim.value_lo < lo:
                alive = v_alive + alive
                lo = victim.value_lo
            else:
                alive = alive + v_alive
                hi = victim.value_hi
            k = len(alive)
            if not 4 * budget <= k < 14 * budget:
                raise InvariantViolation(f"merged alive count {k} out of range")
            replaced[victim.addr] = []

        pieces: list[tuple] = []
        if k < 8 * budget:
            pieces.append((lo, hi, alive))
        else:
            left = (k + 1) // 2
            split_value = alive[left]
            pieces.append((lo, split_value, alive[:left]))
            pieces.append((split_value, hi, alive[left:]))
        new_rects = [
            Rectangle.create(self.store, plo, phi, version, pvals)
            for plo, phi, pvals in pieces
        ]
        replaced[rect.addr] = new_rects
        rect.close(self.store, version, _REASON_BUDGET)

        new_root = self._copy_paths(replaced)
        self._set_root(new_root)
        self.open_rect_count += len(new_rects) - (2 if victim is not None else 1)

        allocs = self.store.stats.allocs - allocs_before
        self._log_close(rect, _REASON_BUDGET, len(alive), len(new_rects), allocs)

    def _log_close(self, rect: Rectangle, reason: int, alive: int,
                   new_rects: int, allocs: int) -> None:
        self.finalize_log.append(
            FinalizeEvent(
                rect_addr=rect.addr,
                reason=reason,
                received=rect.received_updates,
                base_count=rect.base_count,
                alive=alive,
                spanning=len(rect.spanning_values(self.store)),
                new_rects=new_rects,
                allocs=allocs,
            )
        )

    def _merge_partner(self, rect: Rectangle) -> Rectangle:
        """Neighboring open rectangle with the deepest lowest common
        ancestor; ties prefer the left neighbor."""
        path = self._path_to_open_rect(rect)
        left_h = right_h = None
        left_entry = right_entry = None
        for node, idx in reversed(path):
            if left_h is None and idx > 0:
                left_h = node.height
                left_entry = node.entries[idx - 1]
            if right_h is None and idx < node.degree - 1:
                right_h = node.height
                right_entry = node.entries[idx + 1]
            if left_h is not None and right_h is not None:
                break
        if left_entry is None and right_entry is None:
            raise InvariantViolation("no merge partner: single-leaf tree")
        if right_entry is None or (left_entry is not None and left_h <= right_h):
            return self._descend_edge(left_entry, leftmost=False)
        return self._descend_edge(right_entry, leftmost=True)

    # ------------------------------------------------------------------
    # path copying
    # ------------------------------------------------------------------

    def _copy_paths(self, replaced: dict[int, list[Rectangle]]) -> int:
        """Copy every root-to-leaf path leading to a replaced leaf; shared
        subtrees are reused, buffers move to the copies, and degree-2*branch
        copies split (possibly cascading into a new degree-2 root)."""
        on_path = self._nodes_on_paths(replaced)
        root = self.read_node(self.root_addr)
        tops = self._rebuild(root, replaced, on_path)
        if not tops:
            raise InvariantViolation("path copy erased the whole tree")
        if len(tops) == 1:
            new_root_addr = tops[0][1]
        else:
            node = self._new_node(root.height + 1, [t[:3] for t in tops],
                                  ABOVE_ALL, [])
            new_root_addr = node.addr
        new_root = self.read_node(new_root_addr)
        if new_root.height > self.params.height_cap:
            raise InvariantViolation("height cap exceeded after path copy")
        return new_root_addr

    def _nodes_on_paths(self, replaced: dict) -> set[int]:
        """Addresses of internal nodes whose subtree holds a replaced leaf."""
        out: set[int] = set()
        for leaf_addr, new_rects in replaced.items():
            probe = new_rects[0].value_lo if new_rects else None
            rect = Rectangle.load(self.store, leaf_addr)
            node = self.read_node(self.root_addr)
            while True:
                out.add(node.addr)
                idx = node.child_slot(rect.value_lo)
                lo, addr, kind = node.entries[idx]
                if kind == CHILD_RECT:
                    assert addr == leaf_addr
                    break
                node = self.read_node(addr)
        return out

    def _rebuild(self, node: Node, replaced: dict, on_path: set[int]) -> list:
        """Rebuild one affected node. Returns 0, 1, or 2 child entries of
        the form (lo, addr, kind, hi) for the parent."""
        new_entries = []
        for idx, (lo, addr, kind) in enumerate(node.entries):
            _, hi = node.child_range(idx)
            if kind == CHILD_RECT and addr in replaced:
                for r in replaced[addr]:
                    new_entries.append((r.value_lo, r.addr, CHILD_RECT, r.value_hi))
            elif kind == CHILD_NODE and addr in on_path:
                child = self.read_node(addr)
                new_entries.extend(self._rebuild(child, replaced, on_path))
            else:
                new_entries.append((lo, addr, kind, hi))
        if not new_entries:
            return []
        if len(new_entries) > self.params.max_degree:
            raise InvariantViolation("degree overflow beyond one split")
        if len(new_entries) == self.params.max_degree:
            half = self.params.branch
            return [
                self._assemble(node, new_entries[:half]),
                self._assemble(node, new_entries[half:]),
            ]
        return [self._assemble(node, new_entries)]

    def _assemble(self, template: Node, entries4: list) -> tuple:
        """Write a fresh copy of template covering the given child entries;
        the template's buffer records whose values fall in range move in."""
        lo = entries4[0][0]
        hi = entries4[-1][3]
        i, j = template.buffer_span(lo, hi)
        buffer = template.buffer[i:j]
        node = self._new_node(
            template.height, [e[:3] for e in entries4], hi, buffer
        )
        return (lo, node.addr, CHILD_NODE, hi)

    # ------------------------------------------------------------------
    # invariant sweeps (debug / tests)
    # ------------------------------------------------------------------

    def check_invariants(self) -> None:
        """Raise InvariantViolation on any structural rule breach in the
        current tree."""
        p = self.params
        root = self.read_node(self.root_addr)
        if root.height > p.height_cap:
            raise InvariantViolation("height exceeds cap")
        if root.lower is not BELOW_ALL or root.upper is not ABOVE_ALL:
            raise InvariantViolation("root does not span the value axis")
        leaf_heights = set()
        for node, lo, hi in self.iter_nodes():
            if node.addr != self.root_addr and not 1 <= node.degree <= p.max_degree - 1:
                raise InvariantViolation(f"degree {node.degree} out of range")
            if node.addr == self.root_addr and node.degree < 1:
                raise InvariantViolation("empty root")
            if len(node.buffer) > p.buffer_cap:
                raise InvariantViolation("buffer over capacity")
            if node.lower != lo or node.upper != hi:
                raise InvariantViolation("child bounds disagree with parent")
            for a, b in zip(node.buffer, node.buffer[1:]):
                if (a[0], a[1]) > (b[0], b[1]):
                    raise InvariantViolation("buffer not sorted")
            prev = None
            for idx, (elo, eaddr, kind) in enumerate(node.entries):
                clo, chi = node.child_range(idx)
                if not clo < chi:
                    raise InvariantViolation("empty child range")
                if prev is not None and prev != clo:
                    raise InvariantViolation("gap between children")
                prev = chi
                if kind == CHILD_RECT:
                    leaf_heights.add(node.height)
                    rect = Rectangle.load(self.store, eaddr)
                    if not rect.is_open:
                        raise InvariantViolation("closed rect is a leaf")
                    if rect.value_lo != clo or rect.value_hi != chi:
                        raise InvariantViolation("rect bounds disagree")
                    if rect.received_updates >= p.rect_budget:
                        raise InvariantViolation("open rect past its budget")
            if node.height == 1:
                for e in node.entries:
                    if e[2] != CHILD_RECT:
                        raise InvariantViolation("non-rect child at height 1")
        if len(leaf_heights) > 1:
            raise InvariantViolation("leaves at differing heights")


def _merge_sorted(a: list, b: list) -> Iterator:
    ia = ib = 0
    na, nb = len(a), len(b)
    while ia < na and ib < nb:
        if (b[ib][0], b[ib][1]) < (a[ia][0], a[ia][1]):
            yield b[ib]
            ib += 1
        else:
            yield a[ia]
            ia += 1
    while ia < na:
        yield a[ia]
        ia += 1
    while ib < nb:
        yield b[ib]
        ib += 1
