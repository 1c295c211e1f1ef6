"""The index: lookup, range, insert with conflict splitting, delete, update,
bulkload, the adjustment trigger, and overflow buffers.

Every stored key sits exactly where its node's model predicts, so a lookup
descends by prediction alone and performs at most one key comparison, at
the terminal entry. Conflicting inserts push the incumbent into a fresh
two-key child; subtree rebuilds keep the height bounded once a node has
grown enough (beta), conflicted enough (alpha), and holds at least 64
elements.

Single-writer: one mutation at a time, no internal locks. Concurrent
read-only lookups are safe only while no mutation is in flight.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _engine
from .errors import (
    KernelDomainError,
    KeyAlreadyExists,
    KeyCollisionError,
    KeyNotFound,
)
from .kernels import KernelFn, default_kernel
from .nodes import MAX_NODE_ENTRIES, NodeStore


@dataclass(frozen=True)
class IndexParams:
    """Tuning knobs; the defaults are the recommended operating point."""

    alpha: float = 0.1               # conflict-ratio threshold for adjustment
    beta: float = 2.0                # growth-factor threshold for adjustment
    delta: float = 2.0               # slots per key when (re)building a node
    max_node_entries: int = MAX_NODE_ENTRIES
    min_adjust_elements: int = 64    # nodes smaller than this never adjust
    overflow_capacity: int = 256     # per side buffer


@dataclass(frozen=True)
class LookupResult:
    found: bool
    node: int        # terminal node id; -1 when a side buffer answered
    position: int
    payload: int | None
    depth: int


@dataclass(frozen=True)
class IndexStats:
    element_count: int
    tree_elements: int
    buffered_elements: int
    node_count: int
    avg_depth: float
    max_depth: int
    index_bytes: int
    adjustments: int
    adjust_seconds: float
    counters: dict = field(repr=False, default_factory=dict)


def qualifies_for_adjust(
    element_num: int,
    build_num: int,
    conflict_num: int,
    *,
    fixed: bool = False,
    alpha: float = 0.1,
    beta: float = 2.0,
    min_adjust_elements: int = 64,
) -> bool:
    """The per-node adjustment gate: growth, conflict ratio, size floor, not fixed."""
    if fixed or element_num < min_adjust_elements:
        return False
    if element_num < beta * build_num:
        return False
    grown = element_num - build_num
    if grown <= 0:
        return False
    return conflict_num / grown >= alpha


def build_partial_tree(store: NodeStore, keys, payloads=None) -> int:
    """Build a subtree over strictly ascending keys; returns its root node id.

    Every position holding one key becomes DATA; positions with more become
    child nodes built recursively the same way. Statistics start at
    element_num = build_num = len(keys), conflict_num = 0.
    """
    ks = np.asarray(keys, store.key_dtype)
    if ks.ndim != 1 or ks.shape[0] == 0:
        raise ValueError("keys must be a non-empty 1-d sequence")
    if np.any(ks[1:] <= ks[:-1]):
        raise ValueError("keys must be strictly ascending without duplicates")
    g = store.kernel.evaluate_array(ks)
    if np.any(g[1:] <= g[:-1]):
        raise KeyCollisionError("distinct keys collapse to equal kernel values in float64")
    if payloads is None:
        vs = np.zeros(ks.shape[0], np.uint64)
    else:
        vs = np.asarray(payloads, np.uint64)
        if vs.shape != ks.shape:
            raise ValueError("payloads must match keys in length")
    store.h, nid = _engine.build_subtree(
        store.h, store.S, store.FL, store.P, store.kid, store.kc, ks, vs
    )
    return int(nid)


class LippIndex:
    """In-memory ordered index with exact position prediction.

    key_type is "u64" (unsigned 64-bit integers) or "f64" (finite doubles);
    payloads are opaque 64-bit values.
    """

    def __init__(
        self,
        key_type: str = "u64",
        params: IndexParams | None = None,
        kernel: KernelFn | None = None,
    ):
        if key_type not in ("u64", "f64"):
            raise ValueError("key_type must be 'u64' or 'f64'")
        self.key_type = key_type
        self.params = params if params is not None else IndexParams()
        self.kernel = kernel if kernel is not None else default_kernel()
        kdt = np.uint64 if key_type == "u64" else np.float64
        p = self.params
        self.store = NodeStore(
            kdt,
            kernel=self.kernel,
            alpha=p.alpha,
            beta=p.beta,
            delta=p.delta,
            max_node_entries=p.max_node_entries,
            min_adjust_elements=p.min_adjust_elements,
            overflow_capacity=p.overflow_capacity,
        )
        self._kdt = np.dtype(kdt).type
        cap = p.overflow_capacity + 1
        bs_cap = p.min_adjust_elements + 1
        self._CK = np.zeros(2, kdt)
        self._B = (
            np.zeros(cap, kdt), np.zeros(cap, np.uint64),       # left buffer
            np.zeros(cap, kdt), np.zeros(cap, np.uint64),       # right buffer
            np.zeros(bs_cap, kdt), np.zeros(bs_cap, np.uint64), # bootstrap buffer
        )
        self._PS = np.zeros(_engine.PS_LEN, np.int64)
        self.adjust_seconds = 0.0
        self.build_seconds = 0.0

    # -- key/payload marshalling ---------------------------------------------

    def _to_key(self, key):
        if self.key_type == "u64":
            k = int(key)
            if isinstance(key, float) and key != k:
                raise TypeError(f"non-integer key {key!r} for a u64 index")
            if not 0 <= k < 2**64:
                raise ValueError(f"key {key!r} out of u64 range")
            kk = np.uint64(k)
        else:
            k = float(key)
            if not math.isfinite(k):
                raise ValueError("f64 keys must be finite (NaN and inf rejected)")
            kk = np.float64(k)
        self.kernel.check_key(float(kk))
        return kk

    @staticmethod
    def _to_payload(payload) -> np.uint64:
        p = int(payload)
        if not 0 <= p < 2**64:
            raise ValueError(f"payload {payload!r} out of 64-bit range")
        return np.uint64(p)

    def _out_key(self, k):
        return int(k) if self.key_type == "u64" else float(k)

    # -- deferred structural work ----------------------------------------------

    def _service_pending(self):
        st = self.store
        code = st.S[_engine.S_PENDING]
        if code == _engine.PEND_NONE:
            return
        t0 = time.perf_counter()
        if code == _engine.PEND_ADJUST:
            st.h = _engine.finish_adjust(
                st.h, st.S, st.FL, self._PS, st.P, st.kid, st.kc
            )
            self.adjust_seconds += time.perf_counter() - t0
        elif code == _engine.PEND_OVERFLOW:
            st.h = _engine.finish_overflow(
                st.h, st.S, st.FL, self._CK, self._B, st.P, st.kid, st.kc
            )
            self.adjust_seconds += time.perf_counter() - t0
        else:  # first root build from the bootstrap buffer
            st.h = _engine.finish_bootstrap(
                st.h, st.S, st.FL, self._CK, self._B, st.P, st.kid, st.kc
            )
            self.build_seconds += time.perf_counter() - t0

    # -- operations --------------------------------------------------------------

    def bulkload(self, keys, payloads=None) -> None:
        """Build the whole index at once; only valid on an empty index.

        Keys may arrive unsorted; duplicates are an error and leave the
        index unchanged.
        """
        if len(self) != 0 or self.store.S[_engine.S_ROOT] >= 0:
            raise ValueError("bulkload requires an empty index")
        ks = np.asarray(keys, self._kdt)
        if ks.ndim != 1 or ks.shape[0] == 0:
            raise ValueError("bulkload needs a non-empty key sequence")
        if self.key_type == "f64" and not np.all(np.isfinite(ks)):
            raise ValueError("f64 keys must be finite (NaN and inf rejected)")
        if payloads is None:
            vs = np.zeros(ks.shape[0], np.uint64)
        else:
            vs = np.asarray(payloads, np.uint64)
            if vs.shape != ks.shape:
                raise ValueError("payloads must match keys in length")
        order = np.argsort(ks, kind="stable")
        ks = ks[order]
        vs = vs[order]
        if np.any(ks[1:] == ks[:-1]):
            raise KeyAlreadyExists("duplicate keys in bulkload input")
        g = self.kernel.evaluate_array(ks)
        if np.any(g[1:] <= g[:-1]):
            raise KeyCollisionError(
                "distinct keys collapse to equal kernel values in float64"
            )
        st = self.store
        t0 = time.perf_counter()
        st.h = _engine.do_bulkload(
            st.h, st.S, st.FL, self._CK, st.P, st.kid, st.kc, ks, vs
        )
        self.build_seconds += time.perf_counter() - t0

    def lookup(self, key) -> LookupResult:
        k = self._to_key(key)
        st = self.store
        found, payload, nid, pos, depth = _engine.op_lookup(
            st.h, st.S, self._CK, self._B, st.kid, st.kc, k
        )
        return LookupResult(
            found=bool(found),
            node=int(nid),
            position=int(pos),
            payload=int(payload) if found else None,
            depth=int(depth),
        )

    def get(self, key, default=None):
        r = self.lookup(key)
        return r.payload if r.found else default

    def insert(self, key, payload) -> None:
        k = self._to_key(key)
        p = self._to_payload(payload)
        st = self.store
        st.h, code = _engine.op_insert(
            st.h, st.S, st.FL, self._CK, self._B, self._PS, st.P, st.kid, st.kc, k, p
        )
        if code == _engine.ERR_DUP:
            raise KeyAlreadyExists(self._out_key(k))
        if code == _engine.ERR_GCOLLIDE:
            raise KeyCollisionError(
                f"key {key!r} collides with a stored key in kernel-value space"
            )
        if code == _engine.ERR_DEPTH:
            raise RuntimeError("traversal depth exceeded the safety bound")
        self._service_pending()

    def delete(self, key) -> None:
        k = self._to_key(key)
        st = self.store
        code = _engine.op_delete(
            st.h, st.S, self._CK, self._B, self._PS, st.kid, st.kc, k
        )
        if code == _engine.ERR_NOTFOUND:
            raise KeyNotFound(self._out_key(k))
        if code == _engine.ERR_DEPTH:
            raise RuntimeError("traversal depth exceeded the safety bound")

    def update(self, key, payload) -> None:
        """Overwrite the payload of an existing key in place."""
        k = self._to_key(key)
        p = self._to_payload(payload)
        st = self.store
        code = _engine.op_update_payload(
            st.h, st.S, self._CK, self._B, st.kid, st.kc, k, p
        )
        if code == _engine.ERR_NOTFOUND:
            raise KeyNotFound(self._out_key(k))

    def update_key(self, key, new_key, payload) -> None:
        """delete(key) followed by insert(new_key, payload).

        If new_key is already present (or unusable), the delete is rolled
        back before re-raising.
        """
        old = self.lookup(key)
        if not old.found:
            raise KeyNotFound(key)
        self.delete(key)
        try:
            self.insert(new_key, payload)
        except (KeyAlreadyExists, KeyCollisionError, KernelDomainError, ValueError):
            self.insert(key, old.payload)
            raise

    def range(self, lo, hi) -> list:
        """All (key, payload) pairs with lo <= key <= hi, ascending."""
        u = self._to_key(lo)
        v = self._to_key(hi)
        if u > v:
            raise ValueError("range start must not exceed range end")
        st = self.store
        ok, ov, cnt = _engine.op_range(
            st.h, st.S, self._CK, self._B, st.kid, st.kc, u, v
        )
        out_key = self._out_key
        return [(out_key(ok[i]), int(ov[i])) for i in range(cnt)]

    # -- batched execution (workload runner) --------------------------------------

    def run_batch(self, ops, keys, pays, found=None):
        """Run pre-scheduled ops (0 = lookup, 1 = insert) as fast as possible.

        Structural rebuilds are serviced (and wall-clock timed) between
        jitted segments. Returns the per-op found flags for lookups.
        """
        ops = np.ascontiguousarray(ops, np.uint8)
        keys = np.ascontiguousarray(keys, self._kdt)
        pays = np.ascontiguousarray(pays, np.uint64)
        if found is None:
            found = np.zeros(ops.shape[0], np.uint8)
        st = self.store
        i = 0
        while True:
            st.h, i = _engine.run_ops(
                st.h, st.S, st.FL, self._CK, self._B, self._PS, st.P,
                st.kid, st.kc, ops, keys, pays, found, i,
            )
            self._service_pending()
            if i >= ops.shape[0]:
                break
        return found

    # -- introspection ----------------------------------------------------------

    def __len__(self) -> int:
        S = self.store.S
        return int(
            S[_engine.S_TREE_ELEMS]
            + S[_engine.S_LB_N]
            + S[_engine.S_RB_N]
            + S[_engine.S_BS_N]
        )

    def __contains__(self, key) -> bool:
        return self.lookup(key).found

    def counters(self) -> dict:
        S = self.store.S
        return {
            "lookups": int(S[_engine.S_N_LOOKUPS]),
            "inserts": int(S[_engine.S_N_INSERTS]),
            "deletes": int(S[_engine.S_N_DELETES]),
            "updates": int(S[_engine.S_N_UPDATES]),
            "ranges": int(S[_engine.S_N_RANGES]),
            "node_visits": int(S[_engine.S_NODE_VISITS]),
            "key_comparisons": int(S[_engine.S_KEY_COMPARES]),
            "adjustments": int(S[_engine.S_ADJUSTMENTS]),
            "conflict_inserts": int(S[_engine.S_CONFLICT_INSERTS]),
            "op_errors": int(S[_engine.S_OP_ERRORS]),
            "pool_hits": int(S[_engine.S_POOL_HITS]),
        }

    def stats(self) -> IndexStats:
        st = self.store
        dep_sum, dep_max, keys, nodes, slots = _engine.depth_stats(st.h, st.S)
        S = st.S
        buffered = int(S[_engine.S_LB_N] + S[_engine.S_RB_N] + S[_engine.S_BS_N])
        index_bytes = (
            int(slots) * 16 + (int(slots) * 2 + 7) // 8 + int(nodes) * 64
        )
        return IndexStats(
            element_count=int(S[_engine.S_TREE_ELEMS]) + buffered,
            tree_elements=int(S[_engine.S_TREE_ELEMS]),
            buffered_elements=buffered,
            node_count=int(nodes),
            avg_depth=float(dep_sum) / keys if keys else 0.0,
            max_depth=int(dep_max),
            index_bytes=index_bytes,
            adjustments=int(S[_engine.S_ADJUSTMENTS]),
            adjust_seconds=self.adjust_seconds,
            counters=self.counters(),
        )

    def audit(self):
        """Full-tree invariant check.

        Returns (position_violations, order_violations, data_entries):
        every DATA entry must sit exactly at its model-predicted slot and
        the in-order key sequence must be strictly ascending.
        """
        st = self.store
        return tuple(int(x) for x in _engine.audit_tree(st.h, st.S, st.kid, st.kc))

    def items(self) -> list:
        """Every stored (key, payload), ascending (buffers included)."""
        if len(self) == 0:
            return []
        lo, hi = self._min_max_keys()
        return self.range(lo, hi)

    def _min_max_keys(self):
        st = self.store
        S = st.S
        cands = []
        lbk, _lv, rbk, _rv, bsk, _bv = self._B
        if S[_engine.S_BS_N] > 0:
            cands.append((bsk[0], bsk[S[_engine.S_BS_N] - 1]))
        if S[_engine.S_LB_N] > 0:
            cands.append((lbk[0], lbk[S[_engine.S_LB_N] - 1]))
        if S[_engine.S_RB_N] > 0:
            cands.append((rbk[0], rbk[S[_engine.S_RB_N] - 1]))
        if S[_engine.S_HAS_MINMAX] == 1 and S[_engine.S_TREE_ELEMS] > 0:
            cands.append((self._CK[0], self._CK[1]))
        lo = min(c[0] for c in cands)
        hi = max(c[1] for c in cands)
        return self._out_key(lo), self._out_key(hi)
