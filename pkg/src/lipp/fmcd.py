"""Minimum-conflict-degree model training.

`fmcd` is the single-pass trainer used by the index itself; `brute_force_min_T`
is the independent O(N^2) enumeration oracle it is tested against;
`fit_linear_regression` is the least-squares baseline it is compared with.
All functions are pure and thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _engine
from .errors import KeyCollisionError
from .kernels import KernelFn, Model, default_kernel, predict_array


@dataclass(frozen=True)
class FmcdResult:
    model: Model
    conflict_degree: int


@dataclass(frozen=True)
class ConflictProfile:
    """Per-position occupancy of a model over a key set."""

    counts: np.ndarray
    max_occupancy: int


def _prepare(keys, L, kernel):
    if kernel is None:
        kernel = default_kernel()
    ks = np.asarray(keys)
    if ks.ndim != 1 or ks.shape[0] == 0:
        raise ValueError("keys must be a non-empty 1-d sequence")
    n = ks.shape[0]
    if np.any(ks[1:] <= ks[:-1]):
        raise ValueError("keys must be strictly ascending without duplicates")
    min_L = 3 if n >= 3 else 2
    if L < min_L:
        raise ValueError(f"L must be at least {min_L} for {n} keys")
    g = kernel.evaluate_array(ks)
    if np.any(g[1:] <= g[:-1]):
        raise KeyCollisionError(
            "distinct keys collapse to equal kernel values in float64"
        )
    return ks, g, kernel


def fmcd(keys, L: int, kernel: KernelFn | None = None) -> FmcdResult:
    """Minimum conflict degree T and its model, in one forward pass.

    Time linear in the number of keys, constant extra space. Keys must be
    strictly ascending and inside the kernel domain.
    """
    _ks, g, kernel = _prepare(keys, L, kernel)
    a, b, t = _engine.fmcd_core(g, L)
    return FmcdResult(model=Model(kernel=kernel, a=float(a), b=float(b)), conflict_degree=int(t))


def brute_force_min_T(keys, L: int, kernel: KernelFn | None = None) -> int:
    """Enumeration oracle: smallest T >= 1 with every pair T apart spanning
    at least U_T = (G(k[n-1-T]) - G(k[T])) / (L-2).

    Once U_T is non-positive the requirement is vacuous, so the scan always
    terminates. Quadratic; used only to check the single-pass trainer.
    """
    _ks, g, _kernel = _prepare(keys, L, kernel)
    n = g.shape[0]
    if n <= 2:
        return 1
    for t in range(1, n):
        u = (g[n - 1 - t] - g[t]) / (L - 2)
        if np.all(g[t:] - g[: n - t] >= u):
            return t
    raise AssertionError("unreachable: U_T turns non-positive before T reaches N")


def realized_conflict_profile(model: Model, keys, L: int) -> ConflictProfile:
    """Exact occupancy histogram of `keys` under `model` over L positions."""
    ks = np.asarray(keys)
    if L < 1:
        raise ValueError("L must be positive")
    if ks.shape[0] == 0:
        return ConflictProfile(counts=np.zeros(L, np.int64), max_occupancy=0)
    if np.any(ks[1:] <= ks[:-1]):
        raise ValueError("keys must be strictly ascending without duplicates")
    pos = predict_array(model, ks, L)
    counts = np.bincount(pos, minlength=L).astype(np.int64)
    return ConflictProfile(counts=counts, max_occupancy=int(counts.max()))


def fit_linear_regression(keys, L: int, kernel: KernelFn | None = None) -> Model:
    """Least-squares fit of evenly spread target positions against G(k).

    The baseline trainer: targets y_i = i*(L-1)/(N-1); the slope is clamped
    to >= 0 so the model stays monotone.
    """
    if kernel is None:
        kernel = default_kernel()
    ks = np.asarray(keys)
    if ks.ndim != 1 or ks.shape[0] < 2:
        raise ValueError("linear regression needs at least two keys")
    if np.any(ks[1:] <= ks[:-1]):
        raise ValueError("keys must be strictly ascending without duplicates")
    n = ks.shape[0]
    x = kernel.evaluate_array(ks)
    y = np.arange(n, dtype=np.float64) * ((L - 1) / (n - 1))
    xm = x.mean()
    ym = y.mean()
    xc = x - xm
    var = float(xc @ xc)
    a = float(xc @ (y - ym)) / var if var > 0 else 0.0
    if a < 0:
        a = 0.0
    b = ym - a * xm
    return Model(kernel=kernel, a=a, b=float(b))
