"""Monte Carlo and quadrature plumbing: streaming moments, RNG streams, chi-square expectations."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np
from scipy import integrate, stats

from .errors import ConvergenceError, DomainError

T = TypeVar("T")
R = TypeVar("R")

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + _GOLDEN) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def derive_stream(master_seed: int, index: int) -> np.random.Generator:
    """Independent generator for worker ``index`` under ``master_seed``.

    The pair is mixed with splitmix64: the seed is advanced once, the index is
    folded in with the golden-ratio increment, and four further splitmix
    outputs form 256 bits of entropy for a PCG64 stream.
    """
    if index < 0:
        raise DomainError("stream index must be nonnegative")
    state, a = _splitmix64(int(master_seed) & _MASK64)
    state = (a ^ ((int(index) * _GOLDEN) & _MASK64)) & _MASK64
    words = []
    for _ in range(4):
        state, out = _splitmix64(state)
        words.append(out)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """CN(0, var) draws: real and imaginary parts are N(0, var/2)."""
    z = rng.standard_normal(tuple(np.atleast_1d(shape)) + (2,))
    return np.sqrt(var / 2.0) * (z[..., 0] + 1j * z[..., 1])


@dataclass
class StreamingMoments:
    """Count, mean and sum of squared deviations with Chan-style merging.

    Values may be scalars or fixed-shape arrays; ``update`` accepts a batch
    along axis 0.
    """

    count: int = 0
    mean: np.ndarray | float = 0.0
    m2: np.ndarray | float = 0.0

    def update(self, batch) -> "StreamingMoments":
        batch = np.asarray(batch, dtype=float)
        if batch.ndim == 0:
            batch = batch[None]
        n = batch.shape[0]
        if n == 0:
            return self
        mean_b = np.mean(batch, axis=0)
        m2_b = np.sum((batch - mean_b) ** 2, axis=0)
        self._merge_raw(n, mean_b, m2_b)
        return self

    def _merge_raw(self, n_b: int, mean_b, m2_b) -> None:
        if self.count == 0:
            self.count, self.mean, self.m2 = n_b, np.array(mean_b, dtype=float), np.array(m2_b, dtype=float)
            return
        n_a = self.count
        n = n_a + n_b
        delta = mean_b - self.mean
        self.mean = self.mean + delta * (n_b / n)
        self.m2 = self.m2 + m2_b + delta**2 * (n_a * n_b / n)
        self.count = n

    def merge(self, other: "StreamingMoments") -> "StreamingMoments":
        out = StreamingMoments(self.count, np.copy(self.mean), np.copy(self.m2))
        if other.count:
            out._merge_raw(other.count, other.mean, other.m2)
        return out

    @property
    def variance(self):
        if self.count < 2:
            return np.zeros_like(np.asarray(self.mean, dtype=float))
        return self.m2 / (self.count - 1)

    @property
    def std_err(self):
        if self.count < 1:
            raise DomainError("no samples")
        return np.sqrt(self.variance / self.count)


def mean_and_stderr(values: np.ndarray) -> tuple[float, float]:
    """Sample mean and its standard error for a 1-D sample."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        raise DomainError("empty sample")
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return mean, se


def chi2_expectation(
    f: Callable[[np.ndarray], np.ndarray],
    dof: int,
    domain: tuple[float, float] = (0.0, np.inf),
    tol: float = 1e-10,
) -> float:
    """``E[f(T) 1{T in domain}]`` for ``T ~ chi2(dof)`` by adaptive quadrature."""
    if dof < 1:
        raise DomainError("dof must be positive")
    lo, hi = domain
    dist = stats.chi2(dof)

    def integrand(t):
        return f(t) * dist.pdf(t)

    points = None
    if np.isfinite(hi) and lo < dof - 2 < hi:
        points = [dof - 2.0]
    value, err, info = integrate.quad(
        integrand, lo, hi, epsabs=tol, epsrel=0.0, limit=500, points=points, full_output=True
    )[:3]
    if err > 10 * tol and err > 1e-12 * abs(value):
        raise ConvergenceError(f"chi-square quadrature error estimate {err:.3g} above tolerance")
    return float(value)


def resolve_threads(threads: int | None) -> int:
    """Worker count from the argument, then ``VECGNNDR_THREADS``, then 1."""
    if threads is None:
        env = os.environ.get("VECGNNDR_THREADS")
        threads = int(env) if env else 1
    if threads < 1:
        raise DomainError("thread count must be positive")
    return threads


def parallel_map(fn: Callable[[T], R], items: Sequence[T] | Iterable[T], threads: int | None = None) -> list[R]:
    """Order-preserving map; results do not depend on the worker count."""
    items = list(items)
    n = resolve_threads(threads)
    if n == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
