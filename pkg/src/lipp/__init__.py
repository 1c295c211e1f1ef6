"""LIPP: an in-memory learned index with precise position predictions.

The index maps 64-bit keys to 64-bit payloads through per-node models
trained for minimum conflict degree, so lookups descend the tree with no
in-node search. The package also ships the benchmark/verification harness
(datasets, workload mixes, baseline, parameter sweeps), a FastAPI service
wrapping it all, and a thin-client CLI.
"""

from .errors import (
    DatasetFormatError,
    KernelDomainError,
    KeyAlreadyExists,
    KeyCollisionError,
    KeyNotFound,
    LippError,
)
from .fmcd import (
    ConflictProfile,
    FmcdResult,
    brute_force_min_T,
    fit_linear_regression,
    fmcd,
    realized_conflict_profile,
)
from .index import (
    IndexParams,
    IndexStats,
    LippIndex,
    LookupResult,
    build_partial_tree,
    qualifies_for_adjust,
)
from .kernels import (
    ExponentialKernel,
    KernelFn,
    LinearKernel,
    LogarithmicKernel,
    Model,
    PolynomialKernel,
    QuadraticKernel,
    kernel_eval,
    kernel_from_spec,
    predict,
)
from .nodes import EntryTag, NodeStats, NodeStore

__version__ = "0.1.0"

__all__ = [
    "LippIndex",
    "IndexParams",
    "IndexStats",
    "LookupResult",
    "build_partial_tree",
    "qualifies_for_adjust",
    "KernelFn",
    "LinearKernel",
    "QuadraticKernel",
    "ExponentialKernel",
    "LogarithmicKernel",
    "PolynomialKernel",
    "Model",
    "kernel_eval",
    "kernel_from_spec",
    "predict",
    "fmcd",
    "FmcdResult",
    "brute_force_min_T",
    "realized_conflict_profile",
    "ConflictProfile",
    "fit_linear_regression",
    "NodeStore",
    "NodeStats",
    "EntryTag",
    "LippError",
    "KeyAlreadyExists",
    "KeyNotFound",
    "KernelDomainError",
    "KeyCollisionError",
    "DatasetFormatError",
    "__version__",
]
