"""Partially-persistent ordered set over a simulated block store.

Every insert or delete creates a new queryable version while only the
newest version accepts updates. Updates are buffered in a low-fan-out
search tree so they move to disk in batches, and all storage goes through
a block store that counts every transfer, which is what lets the bench
harness check the amortized I/O bounds empirically.
"""

from .blockstore import (
    ABOVE_ALL,
    BELOW_ALL,
    BadBlockError,
    Block,
    BlockStore,
    Bound,
    CacheFullError,
    IoStats,
    PinLimitError,
    StoreConfig,
    StoreError,
)
from .core import (
    DELETE,
    INSERT,
    BlockedList,
    Rectangle,
    UpdateRecord,
    alive_at,
    alive_set,
    merge,
    merge_lists,
    record_key,
    record_order,
)
from .games import (
    GameState,
    harmonic,
    harmonic_float,
    random_rounds,
    subtraction_round,
    tightness_adversary,
    zeroing_round,
)
from .oracle import SetOracle
from .pset import (
    Epoch,
    InvalidVersionError,
    PersistentSet,
    PurgedVersionError,
)
from .tree import (
    BepsTree,
    InvariantViolation,
    Params,
    POLICY_OVERFLOW,
    POLICY_PATH,
    compute_params,
)

__all__ = [
    "ABOVE_ALL",
    "BELOW_ALL",
    "BadBlockError",
    "BepsTree",
    "Block",
    "BlockStore",
    "BlockedList",
    "Bound",
    "CacheFullError",
    "DELETE",
    "Epoch",
    "GameState",
    "INSERT",
    "InvalidVersionError",
    "InvariantViolation",
    "IoStats",
    "Params",
    "PersistentSet",
    "PinLimitError",
    "POLICY_OVERFLOW",
    "POLICY_PATH",
    "PurgedVersionError",
    "Rectangle",
    "SetOracle",
    "StoreConfig",
    "StoreError",
    "UpdateRecord",
    "alive_at",
    "alive_set",
    "compute_params",
    "harmonic",
    "harmonic_float",
    "merge",
    "merge_lists",
    "random_rounds",
    "record_key",
    "record_order",
    "subtraction_round",
    "tightness_adversary",
    "zeroing_round",
]
