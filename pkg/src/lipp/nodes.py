"""Node memory layout: entry arena, 2-bit type vector, headers, small-node pool.

A NodeStore owns the flat arrays one index lives in. Entries are a 16-byte
union (8B key + 8B payload for DATA, or a child handle), typed by a packed
bit vector with two bits per entry: bit 2i set means non-NULL, bit 2i+1 set
means the entry holds a child. A zeroed vector is therefore a fresh
all-NULL node.

Single-writer: no internal synchronization. A store (with its pool) may
move between threads only while no operation is in flight.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _engine
from .errors import KeyAlreadyExists, KeyCollisionError
from .kernels import KernelFn, Model, default_kernel

#: Logical per-node header: model (16B) + length/offset (16B) + statistics
#: (3*8B) + flags (8B). Used for index-size accounting only.
NODE_HEADER_BYTES = 64

MAX_NODE_ENTRIES = 1 << 20  # 16MB of 16-byte entries


class EntryTag(enum.IntEnum):
    NULL = _engine.TAG_NULL
    DATA = _engine.TAG_DATA
    NODE = _engine.TAG_NODE


@dataclass(frozen=True)
class NodeStats:
    element_num: int
    build_num: int
    conflict_num: int
    fixed: bool


class NodeStore:
    """Arena-backed storage for the nodes of one index."""

    def __init__(
        self,
        key_dtype=np.uint64,
        *,
        kernel: KernelFn | None = None,
        alpha: float = 0.1,
        beta: float = 2.0,
        delta: float = 2.0,
        max_node_entries: int = MAX_NODE_ENTRIES,
        min_adjust_elements: int = 64,
        overflow_capacity: int = 256,
    ):
        if max_node_entries < 4 or max_node_entries > MAX_NODE_ENTRIES:
            raise ValueError(f"max_node_entries must be in [4, {MAX_NODE_ENTRIES}]")
        if alpha <= 0 or beta <= 1 or delta <= 1:
            raise ValueError("alpha must be > 0, beta and delta > 1")
        if overflow_capacity < 1 or min_adjust_elements < 1:
            raise ValueError("capacities must be positive")
        self.key_dtype = np.dtype(key_dtype)
        self.kernel = kernel if kernel is not None else default_kernel()
        self.kid = self.kernel.engine_id
        self.kc = np.asarray(self.kernel.coeffs, np.float64)

        self.h = (
            np.zeros(1024, self.key_dtype),       # entry keys
            np.zeros(1024, np.uint64),            # entry payload / child / free link
            np.zeros((2 * 1024 + 63) // 64, np.uint64),  # 2-bit tags
            np.zeros(64, np.float64),             # model slope
            np.zeros(64, np.float64),             # model intercept
            np.zeros(64, np.int64),               # node length
            np.zeros(64, np.int64),               # entry offset
            np.zeros(64, np.int64),               # element_num
            np.zeros(64, np.int64),               # build_num
            np.zeros(64, np.int64),               # conflict_num
            np.zeros(64, np.uint8),               # fixed flag
        )
        self.S = np.zeros(_engine.SLEN, np.int64)
        self.S[_engine.S_ROOT] = -1
        self.S[_engine.S_NODE_FREE] = -1
        self.S[_engine.S_POOL_HEAD] = -1
        self.S[_engine.S_MAX_L] = max_node_entries
        self.S[_engine.S_MIN_ADJUST] = min_adjust_elements
        self.S[_engine.S_OV_CAP] = overflow_capacity
        small = int(delta * 2)
        self.S[_engine.S_SMALL_L] = min(max_node_entries, max(4, small))
        self.FL = np.full(64, -1, np.int64)
        self.P = np.array([alpha, beta, delta, 0.0], np.float64)

    # -- raw entry access ---------------------------------------------------

    def _entry_index(self, nid: int, i: int) -> int:
        L = int(self.h[5][nid])
        if L <= 0:
            raise ValueError(f"node {nid} is not live")
        if not 0 <= i < L:
            raise IndexError(f"entry index {i} out of range for node of {L} entries")
        return int(self.h[6][nid]) + i

    def get_tag(self, nid: int, i: int) -> EntryTag:
        return EntryTag(int(_engine.tag_get(self.h[2], self._entry_index(nid, i))))

    def set_tag(self, nid: int, i: int, tag: EntryTag) -> None:
        _engine.tag_set(self.h[2], self._entry_index(nid, i), int(EntryTag(tag)))

    def set_data(self, nid: int, i: int, key, payload: int) -> None:
        e = self._entry_index(nid, i)
        self.h[0][e] = key
        self.h[1][e] = np.uint64(payload)
        _engine.tag_set(self.h[2], e, _engine.TAG_DATA)

    def set_child(self, nid: int, i: int, child: int) -> None:
        e = self._entry_index(nid, i)
        self.h[1][e] = np.uint64(child)
        _engine.tag_set(self.h[2], e, _engine.TAG_NODE)

    def entry(self, nid: int, i: int):
        """(tag, key, value): value is the payload for DATA, child id for NODE."""
        e = self._entry_index(nid, i)
        tag = EntryTag(int(_engine.tag_get(self.h[2], e)))
        if tag == EntryTag.DATA:
            return tag, self.h[0][e].item(), int(self.h[1][e])
        if tag == EntryTag.NODE:
            return tag, None, int(self.h[1][e])
        return tag, None, None

    # -- node headers ---------------------------------------------------------

    def new_node(self, L: int) -> int:
        if L < 1 or L > int(self.S[_engine.S_MAX_L]):
            raise ValueError("node length out of range")
        self.h, nid = _engine.new_node(self.h, self.S, self.FL, L)
        return int(nid)

    def node_len(self, nid: int) -> int:
        return int(self.h[5][nid])

    def node_model(self, nid: int) -> Model:
        return Model(kernel=self.kernel, a=float(self.h[3][nid]), b=float(self.h[4][nid]))

    def node_stats(self, nid: int) -> NodeStats:
        return NodeStats(
            element_num=int(self.h[7][nid]),
            build_num=int(self.h[8][nid]),
            conflict_num=int(self.h[9][nid]),
            fixed=bool(self.h[10][nid]),
        )

    # -- two-entry pool -------------------------------------------------------

    def acquire_two_key_node(self, key, payload, key2, payload2) -> int:
        """Node trained on two keys, recycled from the pool when possible."""
        if key == key2:
            raise KeyAlreadyExists(f"duplicate key {key!r} for two-key node")
        if key > key2:
            key, key2 = key2, key
            payload, payload2 = payload2, payload
        g0 = self.kernel.evaluate(key)
        g1 = self.kernel.evaluate(key2)
        if not g0 < g1:
            raise KeyCollisionError(
                "two-key node: keys collapse to equal kernel values in float64"
            )
        kdt = self.key_dtype.type
        self.h, nid = _engine.make_two_key_node(
            self.h, self.S, self.FL, self.kid, self.kc,
            kdt(key), np.uint64(payload), kdt(key2), np.uint64(payload2),
        )
        return int(nid)

    def release_subtree(self, nid: int) -> None:
        """Return a detached subtree to the pool / free lists."""
        bad = _engine.release_subtree(self.h, self.S, self.FL, nid)
        if bad:
            raise ValueError(f"release_subtree: {bad} node(s) were already free")

    def clear_pool(self) -> None:
        _engine.pool_clear(self.h, self.S, self.FL)

    # -- accounting -----------------------------------------------------------

    @property
    def pool_size(self) -> int:
        return int(self.S[_engine.S_POOL_SIZE])

    @property
    def pool_hits(self) -> int:
        return int(self.S[_engine.S_POOL_HITS])

    @property
    def live_nodes(self) -> int:
        return int(self.S[_engine.S_LIVE_NODES])

    @property
    def live_entry_slots(self) -> int:
        return int(self.S[_engine.S_LIVE_SLOTS])

    def logical_bytes(self) -> int:
        """16B per entry slot + 2 bits per slot + a fixed header per node."""
        slots = self.live_entry_slots
        return slots * 16 + (slots * 2 + 7) // 8 + self.live_nodes * NODE_HEADER_BYTES
