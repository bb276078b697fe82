"""Simulated external memory with exact I/O accounting.

Storage is an array of fixed-capacity blocks. Each block holds up to B
records (4-field slots) plus a chain pointer, and every transfer between
the backing store and the bounded frame cache counts as one I/O:

  * a read is counted when a block is fetched into the cache,
  * a write is counted when a dirty block is evicted or flushed.

The cache holds ``cache_frames`` blocks (the classic M/B), replacement is
least-recently-used over the unpinned frames, and pinned frames are never
evicted. Running out of evictable frames is a hard error, never a silent
overflow.

Backing is either a plain dict (default) or a file. The file layout is
little-endian: block 0 is a header {magic, B, frame count, allocation
bitmap root}, payload blocks are raw slot arrays. Slot fields must be
integers in the open interval (INT64_MIN, INT64_MAX); the two extremes
are reserved to encode the below/above-everything bounds used for value
ranges. In-memory backing accepts any Python values in slots.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from typing import Optional


class StoreError(Exception):
    """Base class for block store failures."""


class BadBlockError(StoreError):
    """Access, free or pin of an address that is not allocated."""


class CacheFullError(StoreError):
    """No evictable frame is available (everything pinned)."""


class PinLimitError(StoreError):
    """Pinning would leave fewer than one working frame."""


class Bound:
    """Totally-ordered sentinel: BELOW_ALL sorts before and ABOVE_ALL after
    every other value. Used for open value ranges."""

    __slots__ = ("_hi",)

    def __init__(self, hi: bool):
        self._hi = hi

    def __lt__(self, other):
        if other is self:
            return False
        return not self._hi

    def __gt__(self, other):
        if other is self:
            return False
        return self._hi

    def __le__(self, other):
        return self is other or not self._hi

    def __ge__(self, other):
        return self is other or self._hi

    def __eq__(self, other):
        return self is other

    def __hash__(self):
        return hash(("bepstree.Bound", self._hi))

    def __repr__(self):
        return "ABOVE_ALL" if self._hi else "BELOW_ALL"


BELOW_ALL = Bound(False)
ABOVE_ALL = Bound(True)

_INT64_MIN = -(2**63)
_INT64_MAX = 2**63 - 1

_HEADER_MAGIC = b"BEPSBLK1"
_SLOT_FIELDS = 4
_SLOT_BYTES = 8 * _SLOT_FIELDS


def _encode_field(v) -> int:
    if v is BELOW_ALL:
        return _INT64_MIN
    if v is ABOVE_ALL:
        return _INT64_MAX
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, int):
        if not (_INT64_MIN < v < _INT64_MAX):
            raise TypeError(f"field {v} out of encodable range")
        return v
    raise TypeError(
        f"file backing requires integer slot fields, got {type(v).__name__}"
    )


def _decode_field(v: int):
    if v == _INT64_MIN:
        return BELOW_ALL
    if v == _INT64_MAX:
        return ABOVE_ALL
    return v


class Block:
    """One block's payload: up to ``capacity`` 4-field slots plus a chain
    pointer to the next block (0 = end of chain)."""

    __slots__ = ("records", "next")

    def __init__(self, records: Optional[list] = None, next: int = 0):
        self.records = records if records is not None else []
        self.next = next

    def copy(self) -> "Block":
        return Block(list(self.records), self.next)


@dataclass
class StoreConfig:
    """block_capacity_B: records per block (>= 2); cache_frames: number of
    cache frames M/B (>= 2); path: file backing, or None for in-memory."""

    block_capacity_B: int
    cache_frames: int
    path: Optional[str] = None

    def validate(self) -> None:
        if self.block_capacity_B < 2:
            raise ValueError("block_capacity_B must be >= 2")
        if self.cache_frames < 2:
            raise ValueError("cache_frames must be >= 2 (M >= 2B)")


@dataclass
class IoStats:
    """Monotone transfer counters. reads/writes are block transfers,
    allocs/frees track the allocated block population."""

    reads: int = 0
    writes: int = 0
    allocs: int = 0
    frees: int = 0

    def snapshot(self) -> "IoStats":
        return IoStats(self.reads, self.writes, self.allocs, self.frees)

    def __sub__(self, other: "IoStats") -> "IoStats":
        return IoStats(
            self.reads - other.reads,
            self.writes - other.writes,
            self.allocs - other.allocs,
            self.frees - other.frees,
        )

    @property
    def total(self) -> int:
        return self.reads + self.writes


@dataclass
class _Frame:
    block: Block
    dirty: bool = False
    pinned: bool = False


class BlockStore:
    """Block store with a bounded LRU cache and pin support.

    Block ids are never reused after free; id 0 is reserved for the file
    header. ``access`` returns the live Block object — handles are only
    valid until the next store call, so callers copy what they keep.
    """

    def __init__(self, config: StoreConfig):
        config.validate()
        self.config = config
        self.stats = IoStats()
        self._next_id = 1
        self._allocated: set[int] = set()
        # cache: addr -> _Frame, insertion order == LRU order (oldest first)
        self._cache: dict[int, _Frame] = {}
        self._pinned_count = 0
        self._file = None
        # optional ownership tags so a whole epoch can be reclaimed at once
        self.current_owner = None
        self._owned: dict = {}
        self._owner_of: dict[int, object] = {}
        if config.path is not None:
            self._open_file(config.path)
        else:
            self._backing: dict[int, Block] = {}

    # -- allocation --------------------------------------------------------

    def allocate(self) -> int:
        addr = self._next_id
        self._next_id += 1
        self._allocated.add(addr)
        self.stats.allocs += 1
        if self.current_owner is not None:
            self._owned.setdefault(self.current_owner, set()).add(addr)
            self._owner_of[addr] = self.current_owner
        # A fresh block enters the cache directly; its first write-back is
        # the first transfer it costs.
        self._install(addr, Block(), dirty=False)
        return addr

    def free(self, addr: int) -> None:
        if addr not in self._allocated:
            raise BadBlockError(f"free of unallocated block {addr}")
        frame = self._cache.get(addr)
        if frame is not None:
            if frame.pinned:
                raise BadBlockError(f"free of pinned block {addr}")
            del self._cache[addr]
        self._allocated.remove(addr)
        self.stats.frees += 1
        owner = self._owner_of.pop(addr, None)
        if owner is not None:
            self._owned[owner].discard(addr)
        if self._file is None:
            self._backing.pop(addr, None)

    def free_owner(self, owner) -> int:
        """Free every live block tagged with an owner; returns the count."""
        addrs = self._owned.pop(owner, set())
        for addr in list(addrs):
            self._owner_of.pop(addr, None)
            self._allocated.remove(addr)
            self.stats.frees += 1
            frame = self._cache.pop(addr, None)
            if frame is not None and frame.pinned:
                raise BadBlockError(f"free of pinned block {addr}")
            if self._file is None:
                self._backing.pop(addr, None)
        return len(addrs)

    @property
    def live_blocks(self) -> int:
        return self.stats.allocs - self.stats.frees

    def allocated_addresses(self) -> frozenset[int]:
        return frozenset(self._allocated)

    # -- access ------------------------------------------------------------

    def access(self, addr: int, mode: str = "r") -> Block:
        """Bring a block into the cache and return its payload. mode 'w'
        marks the frame dirty."""
        if addr not in self._allocated:
            raise BadBlockError(f"access of unallocated block {addr}")
        frame = self._cache.get(addr)
        if frame is None:
            block = self._fetch(addr)
            self.stats.reads += 1
            frame = self._install(addr, block, dirty=False)
        else:
            # refresh LRU position
            del self._cache[addr]
            self._cache[addr] = frame
        if mode == "w":
            frame.dirty = True
        elif mode != "r":
            raise ValueError(f"bad access mode {mode!r}")
        return frame.block

    def read(self, addr: int) -> Block:
        return self.access(addr, "r")

    def write(self, addr: int) -> Block:
        return self.access(addr, "w")

    # -- pinning -----------------------------------------------------------

    def pin(self, addr: int) -> None:
        """Make a block eviction-exempt. At least one working frame must
        remain, so at most cache_frames - 1 blocks can be pinned."""
        if addr not in self._allocated:
            raise BadBlockError(f"pin of unallocated block {addr}")
        frame = self._cache.get(addr)
        if frame is not None and frame.pinned:
            return
        if self._pinned_count >= self.config.cache_frames - 1:
            raise PinLimitError(
                f"cannot pin more than {self.config.cache_frames - 1} blocks"
            )
        self.access(addr)
        self._cache[addr].pinned = True
        self._pinned_count += 1

    def unpin(self, addr: int) -> None:
        frame = self._cache.get(addr)
        if frame is None or not frame.pinned:
            raise BadBlockError(f"unpin of block {addr} that is not pinned")
        frame.pinned = False
        self._pinned_count -= 1

    @property
    def pinned_count(self) -> int:
        return self._pinned_count

    # -- cache internals ----------------------------------------------------

    def _install(self, addr: int, block: Block, dirty: bool) -> _Frame:
        if len(self._cache) >= self.config.cache_frames:
            self._evict_one()
        frame = _Frame(block, dirty=dirty)
        self._cache[addr] = frame
        return frame

    def _evict_one(self) -> None:
        victim = None
        for addr, frame in self._cache.items():  # oldest first
            if not frame.pinned:
                victim = addr
                break
        if victim is None:
            raise CacheFullError("all cache frames are pinned")
        frame = self._cache.pop(victim)
        if frame.dirty:
            self._write_back(victim, frame.block)
            self.stats.writes += 1

    def flush(self) -> None:
        """Write back every dirty frame (frames stay resident)."""
        for addr, frame in self._cache.items():
            if frame.dirty:
                self._write_back(addr, frame.block)
                self.stats.writes += 1
                frame.dirty = False

    # -- backing ------------------------------------------------------------

    def _fetch(self, addr: int) -> Block:
        if self._file is None:
            block = self._backing.get(addr)
            return block.copy() if block is not None else Block()
        return self._read_file_block(addr)

    def _write_back(self, addr: int, block: Block) -> None:
        if self._file is None:
            self._backing[addr] = block.copy()
        else:
            self._write_file_block(addr, block)

    # -- file backing ---------------------------------------------------------

    @property
    def _block_bytes(self) -> int:
        return 12 + self.config.block_capacity_B * _SLOT_BYTES

    def _open_file(self, path: str) -> None:
        exists = os.path.exists(path) and os.path.getsize(path) > 0
        self._file = open(path, "r+b" if exists else "w+b")
        if exists:
            self._load_header()
        else:
            self._write_header(bitmap_root=0)

    def _write_file_block(self, addr: int, block: Block) -> None:
        b = self.config.block_capacity_B
        if len(block.records) > b:
            raise StoreError(f"block {addr} over capacity")
        buf = bytearray(self._block_bytes)
        struct.pack_into("<IQ", buf, 0, len(block.records), block.next)
        off = 12
        for rec in block.records:
            if len(rec) != _SLOT_FIELDS:
                raise TypeError("slots are 4-field tuples")
            struct.pack_into("<4q", buf, off, *(_encode_field(f) for f in rec))
            off += _SLOT_BYTES
        self._file.seek(addr * self._block_bytes)
        self._file.write(buf)

    def _read_file_block(self, addr: int) -> Block:
        self._file.seek(addr * self._block_bytes)
        buf = self._file.read(self._block_bytes)
        if len(buf) < self._block_bytes:
            return Block()  # allocated but never written back
        count, nxt = struct.unpack_from("<IQ", buf, 0)
        records = []
        off = 12
        for _ in range(count):
            fields = struct.unpack_from("<4q", buf, off)
            records.append(tuple(_decode_field(f) for f in fields))
            off += _SLOT_BYTES
        return Block(records, nxt)

    def _write_header(self, bitmap_root: int) -> None:
        buf = bytearray(self._block_bytes)
        struct.pack_into(
            "<8sIIQQ",
            buf,
            0,
            _HEADER_MAGIC,
            self.config.block_capacity_B,
            self.config.cache_frames,
            self._next_id,
            bitmap_root,
        )
        self._file.seek(0)
        self._file.write(buf)

    def _load_header(self) -> None:
        self._file.seek(0)
        head = self._file.read(32)
        magic, b, frames, next_id, bitmap_root = struct.unpack_from("<8sIIQQ", head, 0)
        if magic != _HEADER_MAGIC:
            raise StoreError("not a block store file")
        if b != self.config.block_capacity_B:
            raise StoreError(
                f"file has block capacity {b}, config says {self.config.block_capacity_B}"
            )
        self._next_id = next_id
        if bitmap_root:
            addr = bitmap_root
            bit = 0
            while addr:
                blk = self._read_file_block(addr)
                for (word, _, _, _) in blk.records:
                    for j in range(62):
                        if word & (1 << j):
                            self._allocated.add(bit + j)
                    bit += 62
                addr = blk.next

    def _save_bitmap(self) -> int:
        """Serialize the allocated set into system blocks past next_id and
        return the chain root. System blocks live outside the counted
        allocation space."""
        if not self._allocated:
            return 0
        top = max(self._allocated)
        words = []
        for lo in range(0, top + 1, 62):
            word = 0
            for j in range(62):
                if (lo + j) in self._allocated:
                    word |= 1 << j
            words.append(word)
        per_block = self.config.block_capacity_B
        addrs = []
        for i in range(0, len(words), per_block):
            addr = self._next_id
            self._next_id += 1
            addrs.append((addr, words[i : i + per_block]))
        root = addrs[0][0] if addrs else 0
        for idx, (addr, chunk) in enumerate(addrs):
            nxt = addrs[idx + 1][0] if idx + 1 < len(addrs) else 0
            blk = Block([(w, 0, 0, 0) for w in chunk], nxt)
            self._write_file_block(addr, blk)
        return root

    def close(self) -> None:
        if self._file is None:
            return
        self.flush()
        root = self._save_bitmap()
        self._write_header(bitmap_root=root)
        self._file.close()
        self._file = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
