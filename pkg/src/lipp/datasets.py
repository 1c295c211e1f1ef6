"""Dataset generation and the binary key-file format.

Generators are pure functions of (provenance, n, seed), built on the
counter-based Philox generator so runs are reproducible. Generated u64
keys are unique both as integers and after conversion to float64 (the
model layer evaluates kernels in doubles; keys that collapse there are
re-drawn exactly like duplicates).

File format: bytes 0-7 magic "LIDXKEY1"; byte 8 key type (0 = u64,
1 = f64); bytes 9-15 zero; bytes 16-23 key count (little-endian u64);
then count keys, 8 bytes each, little-endian.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DatasetFormatError

MAGIC = b"LIDXKEY1"
HEADER = struct.Struct("<8sB7xQ")
HEADER_BYTES = HEADER.size  # 24

_KEY_TYPE_CODE = {"u64": 0, "f64": 1}
_KEY_TYPE_NAME = {0: "u64", 1: "f64"}
_KEY_DTYPE = {"u64": np.dtype("<u8"), "f64": np.dtype("<f8")}

GENERATING_FUNCTIONS = ("pow2", "pow3", "pow4", "log", "exp")

# Exponent span for the exp generating function: large enough for a heavily
# skewed front, small enough that scaled low-end steps stay above 1.
_EXP_SPAN = 30.0
_FN_SCALE = float(2**62)


@dataclass(frozen=True)
class Dataset:
    key_type: str           # "u64" | "f64"
    keys: np.ndarray
    provenance: str
    seed: int

    def __post_init__(self):
        if self.key_type not in _KEY_TYPE_CODE:
            raise ValueError("key_type must be 'u64' or 'f64'")

    def __len__(self):
        return int(self.keys.shape[0])

    def summary(self) -> dict:
        ks = self.keys
        lo = ks.min() if len(self) else 0
        hi = ks.max() if len(self) else 0
        cast = int if self.key_type == "u64" else float
        return {
            "provenance": self.provenance,
            "key_type": self.key_type,
            "count": len(self),
            "min": cast(lo),
            "max": cast(hi),
            "seed": self.seed,
        }


def _generator(seed: int, stream: int = 0) -> np.random.Generator:
    child = np.random.SeedSequence(seed).spawn(stream + 1)[stream]
    return np.random.Generator(np.random.Philox(child))


def _unique_in_draw_order(keys: np.ndarray, also_as_float: bool) -> np.ndarray:
    _, idx = np.unique(keys, return_index=True)
    idx.sort()
    keys = keys[idx]
    if also_as_float:
        _, idx = np.unique(keys.astype(np.float64), return_index=True)
        idx.sort()
        keys = keys[idx]
    return keys


def _fill_unique(draw, n: int) -> np.ndarray:
    """Draw until n keys survive dedup (integer and float64 identity)."""
    keys = _unique_in_draw_order(draw(n), also_as_float=True)
    while keys.shape[0] < n:
        extra = draw(max(64, n - keys.shape[0]))
        keys = _unique_in_draw_order(np.concatenate([keys, extra]), also_as_float=True)
    return keys[:n]


def gen_uniform(n: int, seed: int) -> Dataset:
    """n unique u64 keys drawn uniformly over the full 64-bit domain."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = _generator(seed)

    def draw(count):
        return rng.integers(0, 2**64 - 1, size=count, dtype=np.uint64, endpoint=True)

    return Dataset("u64", _fill_unique(draw, n), "uniform", seed)


def gen_lognormal(n: int, sigma: float = 2.0, seed: int = 0) -> Dataset:
    """floor(X * 1e9) for lognormal X (mu = 0); duplicates re-drawn."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    rng = _generator(seed)

    def draw(count):
        return np.floor(rng.lognormal(0.0, sigma, count) * 1e9).astype(np.uint64)

    return Dataset("u64", _fill_unique(draw, n), "lognormal", seed)


def gen_by_function(fn: str, n: int, seed: int, jitter: float = 0.4) -> Dataset:
    """Keys fn(x) over jittered ascending x, scaled into the u64 range.

    fn is one of pow2/pow3/pow4/log/exp. With jitter=0 and no dedup
    shortfall the keys are exactly proportional to fn(1..n).
    """
    if fn not in GENERATING_FUNCTIONS:
        raise ValueError(f"unknown generating function {fn!r}")
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 <= jitter < 1:
        raise ValueError("jitter must be in [0, 1)")
    m = n
    attempt = 0
    while True:
        rng = _generator(seed, stream=attempt)
        x = np.arange(1, m + 1, dtype=np.float64)
        if jitter:
            x = x + rng.random(m) * jitter
        if fn == "pow2":
            y = x * x
        elif fn == "pow3":
            y = x**3
        elif fn == "pow4":
            y = x**4
        elif fn == "log":
            y = np.log(x)
        else:
            y = np.exp(x * (_EXP_SPAN / n))
        keys = (y * (_FN_SCALE / y[-1])).astype(np.uint64)
        keys = _unique_in_draw_order(keys, also_as_float=True)
        if keys.shape[0] >= n:
            return Dataset("u64", keys[:n], fn, seed)
        attempt += 1
        m += max(64, 2 * (n - keys.shape[0]))


def save_dataset(dataset: Dataset, path) -> int:
    """Write the binary format; returns the byte count."""
    dt = _KEY_DTYPE[dataset.key_type]
    payload = np.ascontiguousarray(dataset.keys, dt).tobytes()
    blob = HEADER.pack(MAGIC, _KEY_TYPE_CODE[dataset.key_type], len(dataset)) + payload
    Path(path).write_bytes(blob)
    return len(blob)


def load_dataset(path, expect_key_type: str | None = None) -> Dataset:
    """Read the binary format back; bit-exact inverse of save_dataset."""
    blob = Path(path).read_bytes()
    if len(blob) < HEADER_BYTES:
        raise DatasetFormatError(f"{path}: truncated header")
    magic, code, count = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise DatasetFormatError(f"{path}: bad magic {magic!r}")
    if code not in _KEY_TYPE_NAME:
        raise DatasetFormatError(f"{path}: unknown key type code {code}")
    key_type = _KEY_TYPE_NAME[code]
    if expect_key_type is not None and key_type != expect_key_type:
        raise DatasetFormatError(
            f"{path}: key type is {key_type}, expected {expect_key_type}"
        )
    body = blob[HEADER_BYTES:]
    if len(body) != 8 * count:
        raise DatasetFormatError(
            f"{path}: expected {8 * count} key bytes, found {len(body)}"
        )
    keys = np.frombuffer(body, _KEY_DTYPE[key_type]).copy()
    if np.unique(keys).shape[0] != count:
        raise DatasetFormatError(f"{path}: duplicate keys")
    if key_type == "f64" and not np.all(np.isfinite(keys)):
        raise DatasetFormatError(f"{path}: non-finite f64 keys")
    return Dataset(key_type, keys, "file", 0)


def generate(dist: str, n: int, seed: int, sigma: float = 2.0) -> Dataset:
    """Name-dispatched generation: uniform, lognormal, or a generating function."""
    if dist == "uniform":
        return gen_uniform(n, seed)
    if dist == "lognormal":
        return gen_lognormal(n, sigma=sigma, seed=seed)
    if dist in GENERATING_FUNCTIONS:
        return gen_by_function(dist, n, seed)
    raise ValueError(f"unknown distribution {dist!r}")
