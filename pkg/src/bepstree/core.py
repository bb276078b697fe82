"""Update records, blocked sorted lists, and rectangles.

The value-version plane is the mental model: inserting x at version v and
deleting it at version w draws the vertical segment {x} x [v, w). An
UpdateRecord is one endpoint of such a segment. A Rectangle is an axis
aligned region [value_lo, value_hi) x [version_lo, version_hi) holding
all its endpoints as a blocked list sorted by (value, version); values
alive when the rectangle was created enter as base-flagged inserts at
version_lo, which is how segments crossing a rectangle border get split.
"""

from __future__ import annotations

from typing import Iterable, Iterator, NamedTuple, Optional

from .blockstore import ABOVE_ALL, Block, BlockStore, Bound

INSERT = 0
DELETE = 1

_REASON_BUDGET = 0
_REASON_MERGE_VICTIM = 1


class UpdateRecord(NamedTuple):
    value: object
    version: int
    kind: int  # INSERT or DELETE
    base: int = 0  # 1 when encoding a value alive at rectangle creation


def record_order(a: UpdateRecord, b: UpdateRecord) -> int:
    """-1/0/+1 comparison by (value, version); value dominates."""
    ka, kb = (a[0], a[1]), (b[0], b[1])
    if ka < kb:
        return -1
    if ka > kb:
        return 1
    return 0


def record_key(rec: UpdateRecord):
    return (rec[0], rec[1])


def alive_at(records_of_one_value: Iterable[UpdateRecord], v: int) -> bool:
    """Given all records of one value inside one rectangle in version
    order, is the value alive at version v? Base records count as
    inserts; the latest record with version <= v decides."""
    last = None
    for rec in records_of_one_value:
        if rec[1] <= v:
            last = rec
        else:
            break
    return last is not None and last[2] == INSERT


def alive_set(records: Iterable[UpdateRecord], v: int) -> list:
    """Alive values at version v from a (value, version)-sorted or
    chronological record stream. Later records for a value must come
    after earlier ones, which both orders guarantee."""
    state: dict = {}
    for rec in records:
        if rec[1] <= v:
            state[rec[0]] = rec[2]
    return sorted(x for x, kind in state.items() if kind == INSERT)


class BlockedList:
    """Chain of blocks holding records in insertion order; the owner keeps
    (head, tail, count). Every block except the last is full when built by
    packing, which keeps blocks at least half full."""

    __slots__ = ("head", "tail", "count")

    def __init__(self, head: int = 0, tail: int = 0, count: int = 0):
        self.head = head
        self.tail = tail
        self.count = count

    @classmethod
    def build(cls, store: BlockStore, records: Iterable[UpdateRecord]) -> "BlockedList":
        """Pack records into fully filled blocks, writing each block once;
        O(1 + n/B) accesses."""
        cap = store.config.block_capacity_B
        it = iter(records)

        def take_chunk() -> list:
            chunk = []
            for rec in it:
                chunk.append(rec)
                if len(chunk) == cap:
                    break
            return chunk

        chunk = take_chunk()
        if not chunk:
            return cls()
        head = addr = store.allocate()
        count = 0
        while chunk:
            nxt_chunk = take_chunk() if len(chunk) == cap else []
            nxt_addr = store.allocate() if nxt_chunk else 0
            blk = store.write(addr)
            blk.records = chunk
            blk.next = nxt_addr
            count += len(chunk)
            tail = addr
            addr, chunk = nxt_addr, nxt_chunk
        return cls(head, tail, count)

    def iter_records(self, store: BlockStore) -> Iterator[UpdateRecord]:
        addr = self.head
        while addr:
            blk = store.read(addr)
            recs = list(blk.records)
            nxt = blk.next
            yield from recs
            addr = nxt

    def blocks(self, store: BlockStore) -> list[int]:
        out = []
        addr = self.head
        while addr:
            out.append(addr)
            addr = store.read(addr).next
        return out

    def append(self, store: BlockStore, rec: UpdateRecord) -> None:
        """Chronological append (flat epochs); amortized O(1/B) writes."""
        cap = store.config.block_capacity_B
        if self.tail:
            blk = store.read(self.tail)
            if len(blk.records) < cap:
                store.write(self.tail).records.append(rec)
                self.count += 1
                return
        addr = store.allocate()
        blk = store.write(addr)
        blk.records = [rec]
        if self.tail:
            store.write(self.tail).next = addr
        else:
            self.head = addr
        self.tail = addr
        self.count += 1

    def free(self, store: BlockStore) -> None:
        addr = self.head
        while addr:
            nxt = store.read(addr).next
            store.free(addr)
            addr = nxt
        self.head = self.tail = 0
        self.count = 0


def merge(store: BlockStore, a: BlockedList, batch: list[UpdateRecord]) -> BlockedList:
    """Sorted union of a list and an in-memory sorted batch into a fresh
    list; the old chain is freed. Duplicates are preserved — every event
    is history. O(1 + (|a| + |batch|)/B) accesses."""
    if not batch:
        return a
    if a.count == 0:
        a.free(store)
        return BlockedList.build(store, batch)
    out = BlockedList.build(store, _merge_iter(a.iter_records(store), iter(batch)))
    a.free(store)
    return out


def merge_lists(store: BlockStore, a: BlockedList, b: BlockedList) -> BlockedList:
    """Streaming sorted union of two blocked lists; both inputs freed."""
    if b.count == 0:
        b.free(store)
        return a
    if a.count == 0:
        a.free(store)
        return b
    out = BlockedList.build(
        store, _merge_iter(a.iter_records(store), b.iter_records(store))
    )
    a.free(store)
    b.free(store)
    return out


def _merge_iter(it_a, it_b) -> Iterator[UpdateRecord]:
    ra = next(it_a, None)
    rb = next(it_b, None)
    while ra is not None and rb is not None:
        if (rb[0], rb[1]) < (ra[0], ra[1]):
            yield rb
            rb = next(it_b, None)
        else:
            yield ra
            ra = next(it_a, None)
    while ra is not None:
        yield ra
        ra = next(it_a, None)
    while rb is not None:
        yield rb
        rb = next(it_b, None)


class Rectangle:
    """Handle over a rectangle header block plus its record list.

    The header is one block: bounds, status, base/record counts, list
    head/tail. Open rectangles grow in place; closed rectangles are
    immutable. received_updates counts everything merged in after the
    base records.
    """

    STATUS_OPEN = 0
    STATUS_CLOSED = 1

    __slots__ = (
        "addr",
        "value_lo",
        "value_hi",
        "version_lo",
        "version_hi",
        "status",
        "base_count",
        "records",
        "close_reason",
    )

    def __init__(self, addr, value_lo, value_hi, version_lo, version_hi, status,
                 base_count, records: BlockedList, close_reason=_REASON_BUDGET):
        self.addr = addr
        self.value_lo = value_lo
        self.value_hi = value_hi
        self.version_lo = version_lo
        self.version_hi = version_hi  # ABOVE_ALL while open
        self.status = status
        self.base_count = base_count
        self.records = records
        self.close_reason = close_reason

    # -- store codec ---------------------------------------------------------

    @classmethod
    def create(cls, store: BlockStore, value_lo, value_hi, version_lo,
               base_values: Iterable) -> "Rectangle":
        """New open rectangle whose base values enter as base-flagged
        inserts at version_lo."""
        records = BlockedList.build(
            store,
            (UpdateRecord(x, version_lo, INSERT, 1) for x in base_values),
        )
        addr = store.allocate()
        rect = cls(
            addr, value_lo, value_hi, version_lo, ABOVE_ALL,
            cls.STATUS_OPEN, records.count, records,
        )
        rect.write_header(store)
        return rect

    @classmethod
    def load(cls, store: BlockStore, addr: int) -> "Rectangle":
        blk = store.read(addr)
        (value_lo, value_hi, version_lo, version_hi) = blk.records[0]
        (status, base_count, count, head) = blk.records[1]
        (close_reason, tail, _, _) = blk.records[2]
        return cls(
            addr, value_lo, value_hi, version_lo, version_hi, status,
            base_count, BlockedList(head, tail, count), close_reason,
        )

    def write_header(self, store: BlockStore) -> None:
        blk = store.write(self.addr)
        blk.records = [
            (self.value_lo, self.value_hi, self.version_lo, self.version_hi),
            (self.status, self.base_count, self.records.count, self.records.head),
            (self.close_reason, self.records.tail, 0, 0),
        ]

    # -- semantics -----------------------------------------------------------

    @property
    def received_updates(self) -> int:
        return self.records.count - self.base_count

    @property
    def is_open(self) -> bool:
        return self.status == self.STATUS_OPEN

    def spans_version(self, v: int) -> bool:
        return self.version_lo <= v < self.version_hi

    def contains_value(self, x) -> bool:
        return self.value_lo <= x < self.value_hi

    def merge_updates(self, store: BlockStore, batch: list[UpdateRecord]) -> None:
        """Merge a (value, version)-sorted batch into the record list and
        persist the header."""
        if not batch:
            return
        assert self.is_open, "closed rectangles are immutable"
        self.records = merge(store, self.records, batch)
        self.write_header(store)

    def close(self, store: BlockStore, version_hi: int, reason: int) -> None:
        assert self.is_open
        self.status = self.STATUS_CLOSED
        self.version_hi = version_hi
        self.close_reason = reason
        self.write_header(store)

    def alive_values(self, store: BlockStore, v: int) -> list:
        """Alive set at version v restricted to this rectangle's range."""
        return alive_set(self.records.iter_records(store), v)

    def spanning_values(self, store: BlockStore) -> list:
        """Values alive in every version the rectangle spans: present as a
        base record and never deleted inside the rectangle."""
        based = set()
        deleted = set()
        for rec in self.records.iter_records(store):
            if rec[3]:
                based.add(rec[0])
            elif rec[2] == DELETE:
                deleted.add(rec[0])
        return sorted(based - deleted)

    def free(self, store: BlockStore) -> None:
        self.records.free(store)
        store.free(self.addr)

    def __repr__(self):
        state = "open" if self.is_open else "closed"
        return (
            f"<Rect {self.addr} [{self.value_lo},{self.value_hi}) x "
            f"[{self.version_lo},{self.version_hi}) {state} "
            f"base={self.base_count} recv={self.received_updates}>"
        )
