"""Deterministic posterior oracle for short phase-noise blocks.

The phases are integrated out with a tensor Gauss-Hermite rule in the
standardized increments ``z``; the node weights are the prior weights times
the marginal likelihood ``p(y | phi)``, and the conditional moments of X given
``(y, phi)`` are combined by the law of total covariance. The order is
doubled from 8 until successive results agree to the tolerance.
"""

from __future__ import annotations

import numpy as np

from ..channels.pnc import PhaseNoiseParams
from ..core import PosteriorStats
from ..errors import ConvergenceError, DomainError

MAX_BLOCK = 3
ORDERS = (8, 16, 32, 64)


def _log_marginal(y: np.ndarray, phi: np.ndarray, P: float, s2: float) -> np.ndarray:
    """``log p(y | phi)`` with X integrated out: ``y | phi ~ CN(0, (P + s2) I)``."""
    rot = np.exp(-1j * phi) * y  # the marginal only sees |e^{-i phi} y|
    return -np.sum(np.abs(rot) ** 2, axis=-1) / (P + s2) - y.size * np.log(np.pi * (P + s2))


def _moments(y: np.ndarray, params: PhaseNoiseParams, order: int):
    B = y.size
    nodes, weights = np.polynomial.hermite_e.hermegauss(order)
    weights = weights / weights.sum()
    grids = np.meshgrid(*([nodes] * B), indexing="ij")
    z = np.stack([g.ravel() for g in grids], axis=-1)
    w = np.prod(np.stack(np.meshgrid(*([weights] * B), indexing="ij"), axis=-1).reshape(-1, B), axis=-1)
    phi = params.c * np.cumsum(z, axis=-1)
    logw = np.log(w) + _log_marginal(y, phi, params.P, params.sigma2)
    wt = np.exp(logw - logw.max())
    wt /= wt.sum()
    k = params.P / (params.P + params.sigma2)
    cvar = params.P * params.sigma2 / (params.P + params.sigma2)
    m = k * np.exp(-1j * phi) * y  # E[X | y, phi]
    mu = wt @ m
    second = np.einsum("n,ni,nj->ij", wt, m, np.conj(m))
    sigma = cvar * np.eye(B) + second - np.outer(mu, np.conj(mu))
    return mu, 0.5 * (sigma + sigma.conj().T)


def quadrature_posterior(y, params: PhaseNoiseParams, tol: float = 1e-8) -> PosteriorStats:
    y = np.asarray(y, dtype=np.complex128).ravel()
    if y.size != params.B_x:
        raise DomainError("y must have length B_x")
    if params.B_x > MAX_BLOCK:
        raise DomainError(f"quadrature oracle supports B_x <= {MAX_BLOCK}")
    prev = None
    for order in ORDERS:
        cur = _moments(y, params, order)
        if prev is not None:
            change = max(np.max(np.abs(cur[0] - prev[0])), np.max(np.abs(cur[1] - prev[1])))
            if change <= tol:
                return PosteriorStats(*cur)
        prev = cur
    raise ConvergenceError("Gauss-Hermite orders exhausted before reaching the tolerance")
