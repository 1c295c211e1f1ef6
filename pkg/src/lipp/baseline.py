"""Sorted-array ordered map: the benchmark comparison point.

Python has no standard-library ordered map; the stdlib idiom is a sorted
sequence searched with `bisect`. This is that structure over numpy arrays,
with the per-op loops jitted so throughput comparisons against the index
measure search work rather than interpreter overhead. Point lookups are
O(log n) binary search; inserts shift the tail and are O(n), which is fine
at desk scale but makes large write-mostly baseline runs slow (the CLI
warns).
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _find(ks, n, k):
    lo = 0
    hi = n
    while lo < hi:
        mid = (lo + hi) >> 1
        if ks[mid] < k:
            lo = mid + 1
        else:
            hi = mid
    return lo, lo < n and ks[lo] == k


@njit(cache=True)
def _insert(ks, vs, n, k, p):
    pos, found = _find(ks, n, k)
    if found:
        return ks, vs, n, False
    if n == ks.shape[0]:
        nk = np.empty(max(16, n * 2), ks.dtype)
        nv = np.empty(max(16, n * 2), vs.dtype)
        nk[:n] = ks[:n]
        nv[:n] = vs[:n]
        ks = nk
        vs = nv
    for i in range(n, pos, -1):
        ks[i] = ks[i - 1]
        vs[i] = vs[i - 1]
    ks[pos] = k
    vs[pos] = p
    return ks, vs, n + 1, True


@njit(cache=True)
def _run(ks, vs, n, ops, keys, pays, found):
    errors = 0
    for i in range(ops.shape[0]):
        if ops[i] == 0:
            pos, hit = _find(ks, n, keys[i])
            found[i] = 1 if hit else 0
        else:
            ks, vs, n, ok = _insert(ks, vs, n, keys[i], pays[i])
            if not ok:
                errors += 1
    return ks, vs, n, errors


class SortedArrayMap:
    """Ordered map over parallel sorted arrays (keys, 64-bit payloads)."""

    def __init__(self, key_dtype=np.uint64):
        self.key_dtype = np.dtype(key_dtype)
        self._ks = np.empty(16, self.key_dtype)
        self._vs = np.empty(16, np.uint64)
        self._n = 0
        self.errors = 0

    def __len__(self):
        return self._n

    def bulkload(self, keys, payloads=None) -> None:
        ks = np.asarray(keys, self.key_dtype)
        if payloads is None:
            vs = np.zeros(ks.shape[0], np.uint64)
        else:
            vs = np.asarray(payloads, np.uint64)
        order = np.argsort(ks, kind="stable")
        self._ks = ks[order]
        self._vs = vs[order]
        if np.any(self._ks[1:] == self._ks[:-1]):
            raise ValueError("duplicate keys in bulkload input")
        self._n = int(ks.shape[0])

    def lookup(self, key):
        pos = int(np.searchsorted(self._ks[: self._n], self.key_dtype.type(key)))
        if pos < self._n and self._ks[pos] == self.key_dtype.type(key):
            return True, int(self._vs[pos])
        return False, None

    def insert(self, key, payload) -> bool:
        self._ks, self._vs, self._n, ok = _insert(
            self._ks, self._vs, self._n,
            self.key_dtype.type(key), np.uint64(payload),
        )
        return bool(ok)

    def range(self, lo, hi) -> list:
        ks = self._ks[: self._n]
        a = int(np.searchsorted(ks, self.key_dtype.type(lo), side="left"))
        b = int(np.searchsorted(ks, self.key_dtype.type(hi), side="right"))
        cast = int if self.key_dtype == np.uint64 else float
        return [(cast(ks[i]), int(self._vs[i])) for i in range(a, b)]

    def run_batch(self, ops, keys, pays, found=None):
        ops = np.ascontiguousarray(ops, np.uint8)
        keys = np.ascontiguousarray(keys, self.key_dtype)
        pays = np.ascontiguousarray(pays, np.uint64)
        if found is None:
            found = np.zeros(ops.shape[0], np.uint8)
        self._ks, self._vs, self._n, errs = _run(
            self._ks, self._vs, self._n, ops, keys, pays, found
        )
        self.errors += int(errs)
        return found

    def logical_bytes(self) -> int:
        return self._n * 16
