"""Monotone kernel functions and the clamped kernelized linear model.

A kernel G is a strictly increasing transform applied to keys before the
per-node linear model; the model maps a key to an entry position in
[0, L-1] by flooring A*G(key) + b and clamping. Kernels are pure values,
safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _engine
from .errors import KernelDomainError

# Largest x with exp(x) finite in float64.
_EXP_MAX = 709.78


class KernelFn:
    """Base class; subclasses define the transform and its valid domain."""

    name = "linear"
    engine_id = _engine.K_LINEAR

    def __init__(self):
        self.coeffs = np.empty(0, np.float64)

    def __repr__(self):
        return f"{type(self).__name__}()"

    def spec_string(self) -> str:
        return self.name

    def _in_domain(self, x: np.ndarray) -> np.ndarray:
        return np.isfinite(x)

    def _raw(self, x):
        return x

    def evaluate(self, key) -> float:
        """G(key); raises KernelDomainError outside the valid domain."""
        x = float(key)
        if not bool(self._in_domain(np.float64(x))):
            raise KernelDomainError(f"key {key!r} outside domain of kernel {self.name!r}")
        return float(self._raw(np.float64(x)))

    def evaluate_array(self, keys: np.ndarray) -> np.ndarray:
        xs = np.asarray(keys, np.float64)
        ok = self._in_domain(xs)
        if not np.all(ok):
            bad = np.argmin(ok)
            raise KernelDomainError(
                f"key {keys[bad]!r} outside domain of kernel {self.name!r}"
            )
        return np.asarray(self._raw(xs), np.float64)

    def check_key(self, key_as_float: float) -> None:
        if not bool(self._in_domain(np.float64(key_as_float))):
            raise KernelDomainError(
                f"key {key_as_float!r} outside domain of kernel {self.name!r}"
            )


class LinearKernel(KernelFn):
    name = "linear"
    engine_id = _engine.K_LINEAR


class QuadraticKernel(KernelFn):
    """x**2; strictly increasing only for positive keys."""

    name = "pow2"
    engine_id = _engine.K_QUADRATIC

    def _in_domain(self, x):
        return np.isfinite(x) & (x > 0)

    def _raw(self, x):
        return x * x


class ExponentialKernel(KernelFn):
    """e**x; keys above ~709.78 overflow to inf and are rejected."""

    name = "exp"
    engine_id = _engine.K_EXPONENTIAL

    def _in_domain(self, x):
        return np.isfinite(x) & (x <= _EXP_MAX)

    def _raw(self, x):
        return np.exp(x)


class LogarithmicKernel(KernelFn):
    """ln(x); valid only for positive keys."""

    name = "log"
    engine_id = _engine.K_LOGARITHMIC

    def _in_domain(self, x):
        return np.isfinite(x) & (x > 0)

    def _raw(self, x):
        return np.log(x)


class PolynomialKernel(KernelFn):
    """sum(c_i * x**i) over a user-supplied key interval.

    Monotonicity has to be checked somewhere; with no closed form for
    arbitrary coefficients we require an explicit (lo, hi) domain and
    verify the derivative is positive at sampled points (endpoints
    included). Construction fails if any sample is non-increasing.
    """

    name = "poly"
    engine_id = _engine.K_POLYNOMIAL

    def __init__(self, coefficients, domain, samples: int = 1025):
        self.coeffs = np.asarray(coefficients, np.float64)
        if self.coeffs.ndim != 1 or self.coeffs.shape[0] < 2:
            raise ValueError("polynomial kernel needs at least coefficients c0, c1")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("polynomial coefficients must be finite")
        lo, hi = float(domain[0]), float(domain[1])
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError("polynomial kernel domain must be a finite (lo, hi) interval")
        self.domain = (lo, hi)
        xs = np.linspace(lo, hi, samples)
        deriv = np.polynomial.polynomial.polyval(
            xs, np.arange(1, self.coeffs.shape[0]) * self.coeffs[1:]
        )
        ys = np.polynomial.polynomial.polyval(xs, self.coeffs)
        if not (np.all(deriv > 0) and np.all(np.diff(ys) > 0) and np.all(np.isfinite(ys))):
            raise ValueError(
                "polynomial kernel is not strictly increasing over the supplied domain"
            )

    def __repr__(self):
        cs = ",".join(repr(float(c)) for c in self.coeffs)
        return f"PolynomialKernel([{cs}], domain={self.domain})"

    def spec_string(self) -> str:
        return "poly:" + ",".join(repr(float(c)) for c in self.coeffs)

    def _in_domain(self, x):
        return np.isfinite(x) & (x >= self.domain[0]) & (x <= self.domain[1])

    def _raw(self, x):
        return np.polynomial.polynomial.polyval(x, self.coeffs)


_BY_NAME = {
    "linear": LinearKernel,
    "pow2": QuadraticKernel,
    "exp": ExponentialKernel,
    "log": LogarithmicKernel,
}


def kernel_from_spec(spec: str, poly_domain=None) -> KernelFn:
    """Parse a kernel name: "linear" | "pow2" | "exp" | "log" | "poly:c0,c1,..."."""
    spec = spec.strip()
    if spec in _BY_NAME:
        return _BY_NAME[spec]()
    if spec.startswith("poly:"):
        try:
            coeffs = [float(c) for c in spec[5:].split(",")]
        except ValueError as exc:
            raise ValueError(f"unparseable polynomial coefficients in {spec!r}") from exc
        if poly_domain is None:
            raise ValueError("polynomial kernels need an explicit key domain (lo, hi)")
        return PolynomialKernel(coeffs, poly_domain)
    raise ValueError(f"unknown kernel {spec!r}")


def default_kernel() -> KernelFn:
    return LinearKernel()


@dataclass(frozen=True)
class Model:
    """Kernelized linear position model: position = clamp(floor(a*G(k) + b))."""

    kernel: KernelFn
    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("model parameters must be finite")
        if self.a < 0:
            raise ValueError("model slope must be non-negative to preserve key order")


def kernel_eval(kernel: KernelFn, key) -> float:
    """G(key) as a finite float; errors outside the kernel domain."""
    return kernel.evaluate(key)


def predict(model: Model, key, L: int) -> int:
    """Entry position of `key` in a node with L slots.

    floor(a*G(k) + b), truncated toward negative infinity, clamped into
    [0, L-1]. Deterministic; pure.
    """
    if L < 1:
        raise ValueError("node length must be at least 1")
    raw = model.a * kernel_eval(model.kernel, key) + model.b
    pos = math.floor(raw)
    if pos < 0:
        return 0
    if pos > L - 1:
        return L - 1
    return pos


def predict_array(model: Model, keys: np.ndarray, L: int) -> np.ndarray:
    """Vectorized predict over a key array (independent of the jitted path)."""
    if L < 1:
        raise ValueError("node length must be at least 1")
    raw = model.a * model.kernel.evaluate_array(keys) + model.b
    pos = np.floor(raw)
    return np.clip(pos, 0, L - 1).astype(np.int64)
