"""Scalar (B_x = 1) specialisation of the optimal metric and its GMI."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..core import DEFAULT_EPS, GmiEstimate, MetricFactors, PosteriorStats, psi
from ..errors import DomainError
from ..gmi import optimal_metric

ScalarStatsSampler = Callable[[np.random.Generator, int], tuple[np.ndarray, np.ndarray]]


def memoryless_gnndr(
    stats_scalar_sampler: ScalarStatsSampler,
    P: float,
    eps: float = DEFAULT_EPS,
    n_samples: int = 100_000,
    rng: np.random.Generator | None = None,
):
    """GMI ``E[psi(w) + |mu|^2 / P]`` and a metric provider mapping scalar ``(mu, w)`` to factors."""
    if n_samples < 100:
        raise DomainError("n_samples must be at least 100")
    rng = np.random.default_rng() if rng is None else rng
    mu, w = stats_scalar_sampler(rng, n_samples)
    mu = np.asarray(mu, dtype=complex).ravel()
    w = np.asarray(w, dtype=float).ravel()
    vals = psi(w, P) + np.abs(mu) ** 2 / P
    est = GmiEstimate(float(np.mean(vals)), float(np.std(vals, ddof=1) / np.sqrt(vals.size)), vals.size, "mc")

    def metric(mu_s, w_s) -> MetricFactors:
        mu_a = np.asarray(mu_s, dtype=complex)[..., None]
        w_a = np.asarray(w_s, dtype=float)[..., None, None].astype(complex)
        return optimal_metric(PosteriorStats(mu_a, w_a), P, eps)

    return est, metric
