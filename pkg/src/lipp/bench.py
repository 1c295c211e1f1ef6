"""Workload scheduling, benchmark execution, reports, and parameter sweeps.

A run is deterministic given (dataset, spec): the dataset is shuffled, the
op mix is materialized as an exact pre-scheduled op array (not sampled
per-op), lookup targets are drawn from the keys present at that point in
the stream, and insert keys come from the held-out remainder.

Throughput is measured on a batch pass whose op loop runs inside the
jitted kernel; structural rebuilds are serviced between segments and
wall-clock timed individually. Per-op latencies (p99/stddev over the full
stream, no sampling) come from a separate replay on a fresh engine, since
timestamping every op would distort the throughput measurement.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .baseline import SortedArrayMap
from .datasets import Dataset
from .errors import KeyAlreadyExists
from .index import IndexParams, LippIndex
from .kernels import KernelFn

#: Exact insert fraction per mix; the rest of the ops are lookups.
MIX_INSERT_FRACTION = {
    "read_only": 0.0,
    "read_heavy": 0.33,
    "write_heavy": 0.67,
    "write_only": 1.0,
}


def normalize_mix(mix: str) -> str:
    name = mix.strip().lower().replace("-", "_")
    if name not in MIX_INSERT_FRACTION:
        raise ValueError(f"unknown workload mix {mix!r}")
    return name


@dataclass(frozen=True)
class WorkloadSpec:
    mix: str
    ops: int
    bulkload_count: int = 0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mix", normalize_mix(self.mix))
        if self.ops < 1:
            raise ValueError("ops must be at least 1")
        if self.bulkload_count < 0:
            raise ValueError("bulkload_count must be non-negative")


@dataclass(frozen=True)
class Schedule:
    bulk_keys: np.ndarray
    bulk_pays: np.ndarray
    ops: np.ndarray          # 0 = lookup, 1 = insert
    keys: np.ndarray
    pays: np.ndarray
    n_inserts: int
    n_lookups: int


def build_schedule(dataset: Dataset, spec: WorkloadSpec) -> Schedule:
    """Materialize the exact op stream for (dataset, spec)."""
    ss = np.random.SeedSequence(spec.seed).spawn(3)
    shuffle_rng = np.random.Generator(np.random.Philox(ss[0]))
    sched_rng = np.random.Generator(np.random.Philox(ss[1]))
    pick_rng = np.random.Generator(np.random.Philox(ss[2]))

    keys = dataset.keys[shuffle_rng.permutation(len(dataset))]
    b = spec.bulkload_count
    if b > keys.shape[0]:
        raise ValueError("bulkload_count exceeds the dataset size")
    n_ins = int(round(spec.ops * MIX_INSERT_FRACTION[spec.mix]))
    n_look = spec.ops - n_ins
    if n_ins > keys.shape[0] - b:
        raise ValueError(
            f"workload needs {n_ins} held-out keys to insert; "
            f"dataset leaves only {keys.shape[0] - b} after bulkload"
        )

    ops = np.zeros(spec.ops, np.uint8)
    ops[:n_ins] = 1
    ops = ops[sched_rng.permutation(spec.ops)]

    # Keys present after op i-1: the bulkloaded block, then inserts in
    # scheduled order. Payload = position in that stream.
    present = keys[: b + n_ins]
    op_keys = np.empty(spec.ops, keys.dtype)
    op_pays = np.zeros(spec.ops, np.uint64)
    ins_mask = ops == 1
    op_keys[ins_mask] = present[b:]
    op_pays[ins_mask] = np.arange(b, b + n_ins, dtype=np.uint64)

    look_mask = ~ins_mask
    if n_look:
        pool = b + (np.cumsum(ins_mask) - ins_mask)[look_mask]
        draws = pick_rng.random(spec.ops)[look_mask]
        if present.shape[0] == 0:
            # Nothing ever present: aim lookups at the dataset, all misses.
            idx = np.minimum((draws * keys.shape[0]).astype(np.int64), keys.shape[0] - 1)
            op_keys[look_mask] = keys[idx]
        else:
            safe_pool = np.maximum(pool, 1)
            idx = np.minimum((draws * safe_pool).astype(np.int64), safe_pool - 1)
            op_keys[look_mask] = present[idx]
    return Schedule(
        bulk_keys=keys[:b],
        bulk_pays=np.arange(b, dtype=np.uint64),
        ops=ops,
        keys=op_keys,
        pays=op_pays,
        n_inserts=n_ins,
        n_lookups=n_look,
    )


@dataclass
class Report:
    """One benchmark run; flat JSON via to_json()."""

    engine: str
    workload: str
    ops: int
    inserts: int
    lookups: int
    found: int
    errors: int
    wall_seconds: float
    throughput: float
    p99_latency_us: float | None
    latency_stddev_us: float | None
    adjustments: int
    adjust_time_fraction: float
    avg_depth: float
    max_depth: int
    index_bytes: int
    element_count: int
    seed: int
    config: dict = field(default_factory=dict)
    baseline_throughput: float | None = None
    speedup_vs_baseline: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, pretty: bool = False) -> str:
        if pretty:
            return json.dumps(self.to_dict(), indent=2, sort_keys=True)
        return json.dumps(self.to_dict(), sort_keys=True)


class _LippEngine:
    name = "lipp"

    def __init__(self, key_type, params, kernel):
        self.index = LippIndex(key_type, params=params, kernel=kernel)

    def bulkload(self, keys, pays):
        if keys.shape[0]:
            self.index.bulkload(keys, pays)

    def run_batch(self, ops, keys, pays):
        return self.index.run_batch(ops, keys, pays)

    def apply_op(self, op, key, pay):
        if op == 0:
            return self.index.lookup(key).found
        try:
            self.index.insert(key, pay)
            return True
        except KeyAlreadyExists:
            return False

    def report_fields(self) -> dict:
        s = self.index.stats()
        return {
            "adjustments": s.adjustments,
            "adjust_seconds": s.adjust_seconds,
            "avg_depth": s.avg_depth,
            "max_depth": s.max_depth,
            "index_bytes": s.index_bytes,
            "element_count": s.element_count,
            "errors": s.counters["op_errors"],
        }


class _BaselineEngine:
    name = "baseline"

    def __init__(self, key_type, params, kernel):
        self.map = SortedArrayMap(np.uint64 if key_type == "u64" else np.float64)

    def bulkload(self, keys, pays):
        if keys.shape[0]:
            self.map.bulkload(keys, pays)

    def run_batch(self, ops, keys, pays):
        return self.map.run_batch(ops, keys, pays)

    def apply_op(self, op, key, pay):
        if op == 0:
            return self.map.lookup(key)[0]
        return self.map.insert(key, pay)

    def report_fields(self) -> dict:
        return {
            "adjustments": 0,
            "adjust_seconds": 0.0,
            "avg_depth": 0.0,
            "max_depth": 0,
            "index_bytes": self.map.logical_bytes(),
            "element_count": len(self.map),
            "errors": self.map.errors,
        }


_ENGINES = {"lipp": _LippEngine, "baseline": _BaselineEngine}


def _measure_latencies(engine, sched: Schedule) -> np.ndarray:
    """Per-op monotonic timestamps over the full stream, in microseconds."""
    ops = sched.ops
    keys = sched.keys
    pays = sched.pays
    lat = np.empty(ops.shape[0], np.float64)
    apply_op = engine.apply_op
    clock = time.perf_counter_ns
    for i in range(ops.shape[0]):
        t0 = clock()
        apply_op(ops[i], keys[i], pays[i])
        lat[i] = clock() - t0
    return lat / 1e3


def run_workload(
    dataset: Dataset,
    spec: WorkloadSpec,
    *,
    engine: str = "lipp",
    params: IndexParams | None = None,
    kernel: KernelFn | None = None,
    measure_latency: bool = True,
) -> Report:
    """Execute the workload and collect the report.

    The op stream is fixed by (dataset, spec); structural report fields
    (heights, adjustment counts, element counts) are deterministic per
    seed, timings are not.
    """
    if engine not in _ENGINES:
        raise ValueError(f"unknown engine {engine!r}")
    warmup(dataset.key_type)
    sched = build_schedule(dataset, spec)
    eng = _ENGINES[engine](dataset.key_type, params, kernel)
    eng.bulkload(sched.bulk_keys, sched.bulk_pays)

    t0 = time.perf_counter()
    found = eng.run_batch(sched.ops, sched.keys, sched.pays)
    wall = time.perf_counter() - t0

    p99 = stddev = None
    if measure_latency:
        replay = _ENGINES[engine](dataset.key_type, params, kernel)
        replay.bulkload(sched.bulk_keys, sched.bulk_pays)
        lat = _measure_latencies(replay, sched)
        p99 = float(np.percentile(lat, 99))
        stddev = float(lat.std())

    fields = eng.report_fields()
    p = params if params is not None else IndexParams()
    config = {
        "engine": engine,
        "workload": spec.mix,
        "ops": spec.ops,
        "bulkload_count": spec.bulkload_count,
        "seed": spec.seed,
        "dataset": dataset.summary(),
        "alpha": p.alpha,
        "beta": p.beta,
        "delta": p.delta,
        "max_node_entries": p.max_node_entries,
        "min_adjust_elements": p.min_adjust_elements,
        "overflow_capacity": p.overflow_capacity,
        "kernel": (kernel.spec_string() if kernel is not None else "linear"),
        "measure_latency": measure_latency,
    }
    return Report(
        engine=engine,
        workload=spec.mix,
        ops=spec.ops,
        inserts=sched.n_inserts,
        lookups=sched.n_lookups,
        found=int(found.sum()),
        errors=int(fields["errors"]),
        wall_seconds=wall,
        throughput=spec.ops / wall if wall > 0 else float("inf"),
        p99_latency_us=p99,
        latency_stddev_us=stddev,
        adjustments=int(fields["adjustments"]),
        adjust_time_fraction=(fields["adjust_seconds"] / wall if wall > 0 else 0.0),
        avg_depth=float(fields["avg_depth"]),
        max_depth=int(fields["max_depth"]),
        index_bytes=int(fields["index_bytes"]),
        element_count=int(fields["element_count"]),
        seed=spec.seed,
        config=config,
    )


def run_baseline(
    dataset: Dataset,
    spec: WorkloadSpec,
    *,
    measure_latency: bool = True,
) -> Report:
    """The same workload against the sorted-array ordered map."""
    return run_workload(
        dataset, spec, engine="baseline", measure_latency=measure_latency
    )


def run_with_baseline(
    dataset: Dataset,
    spec: WorkloadSpec,
    *,
    params: IndexParams | None = None,
    kernel: KernelFn | None = None,
    measure_latency: bool = True,
) -> Report:
    """LIPP report annotated with the baseline throughput ratio."""
    rep = run_workload(
        dataset, spec, params=params, kernel=kernel, measure_latency=measure_latency
    )
    base = run_baseline(dataset, spec, measure_latency=False)
    rep.baseline_throughput = base.throughput
    rep.speedup_vs_baseline = rep.throughput / base.throughput
    return rep


_WARMED: set = set()


def warmup(key_type: str = "u64") -> None:
    """Compile (or load from disk cache) every jitted kernel for a key type.

    Timed sections would otherwise absorb one-off compilation; run_workload
    calls this before starting any clock. Idempotent per process.
    """
    if key_type in _WARMED:
        return
    _WARMED.add(key_type)
    conv = (lambda x: x) if key_type == "u64" else float
    params = IndexParams(
        alpha=0.01, beta=1.5, min_adjust_elements=4, overflow_capacity=4
    )
    ix = LippIndex(key_type, params=params)
    for i in range(6):  # bootstrap build fires at 4 elements
        ix.insert(conv(100 * i + 50), i)
    for i in range(8):  # conflicting inserts force a subtree rebuild
        ix.insert(conv(100 * i + 51), i)
        ix.insert(conv(100 * i + 52), i)
    for i in range(6):  # beyond-max inserts force the overflow rebuild
        ix.insert(conv(10_000 + i), i)
    for i in range(6):
        ix.insert(conv(i + 1), i)
    ix.lookup(conv(51))
    ix.range(conv(1), conv(200))
    ix.delete(conv(51))
    ix.update(conv(52), 9)
    ix.stats()
    ix.audit()
    nid = ix.store.acquire_two_key_node(conv(3), 0, conv(7), 1)
    ix.store.release_subtree(nid)
    ix.store.clear_pool()
    ops = np.array([1, 0], np.uint8)
    kdt = np.uint64 if key_type == "u64" else np.float64
    ks = np.array([conv(77777), conv(77777)], kdt)
    ps = np.zeros(2, np.uint64)
    ix.run_batch(ops, ks, ps)
    ix2 = LippIndex(key_type)
    ix2.bulkload(np.array([conv(2), conv(4), conv(6)], kdt))
    m = SortedArrayMap(kdt)
    m.bulkload(np.array([conv(2), conv(4)], kdt))
    m.run_batch(ops, ks, ps)
    m.lookup(conv(2))
    m.range(conv(0), conv(9))


SWEEPABLE = ("alpha", "beta")


def sweep(
    param: str,
    values,
    dataset: Dataset,
    spec: WorkloadSpec,
    *,
    params: IndexParams | None = None,
    kernel: KernelFn | None = None,
    measure_latency: bool = False,
) -> list[Report]:
    """One full run per value; everything else stays at its default."""
    if param not in SWEEPABLE:
        raise ValueError(f"sweep parameter must be one of {SWEEPABLE}")
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    if any(v <= 0 for v in values):
        raise ValueError("sweep values must be positive")
    base = params if params is not None else IndexParams()
    reports = []
    for v in values:
        kwargs = asdict(base)
        kwargs[param] = float(v)
        reports.append(
            run_workload(
                dataset,
                spec,
                params=IndexParams(**kwargs),
                kernel=kernel,
                measure_latency=measure_latency,
            )
        )
    return reports
