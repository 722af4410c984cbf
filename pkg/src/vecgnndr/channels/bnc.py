"""Block noncoherent AWGN channel: ``y = exp(i theta) x + n`` with one uniform phase per block."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from ..core import DEFAULT_EPS, GmiEstimate, MetricFactors, PosteriorStats, hermitian_eigh
from ..errors import DomainError
from ..expectation import chi2_expectation, complex_normal
from .base import ChannelModel, check_lambdas

ELEMENTWISE_LIMIT = float(np.euler_gamma - np.exp(-1.0) + special.exp1(1.0))


@dataclass(frozen=True)
class BlockNoncoherentParams:
    B_x: int
    P: float
    sigma2: float

    def __post_init__(self) -> None:
        if int(self.B_x) != self.B_x or self.B_x < 1:
            raise DomainError("B_x must be a positive integer")
        if not (self.P > 0 and self.sigma2 > 0):
            raise DomainError("P and sigma2 must be positive")


def bnc_sample(params: BlockNoncoherentParams, rng: np.random.Generator, theta: float | None = None):
    """One block: ``(x, theta, y)``. Passing ``theta`` pins the rotation."""
    x = complex_normal(rng, params.B_x, params.P)
    th = rng.uniform(0.0, 2 * np.pi) if theta is None else float(theta)
    n = complex_normal(rng, params.B_x, params.sigma2)
    return x, th, np.exp(1j * th) * x + n


def bnc_posterior_stats(y: np.ndarray, params: BlockNoncoherentParams) -> PosteriorStats:
    """Zero mean and ``P s2/(P+s2) I + (P/(P+s2))^2 y y^H`` (batched over leading axes)."""
    y = np.asarray(y, dtype=np.complex128)
    P, s2 = params.P, params.sigma2
    k = P / (P + s2)
    eye = np.eye(y.shape[-1])
    sigma = P * s2 / (P + s2) * eye + k**2 * y[..., :, None] * np.conj(y[..., None, :])
    return PosteriorStats(np.zeros_like(y), sigma)


def _psi_rest(P: float, s2: float) -> float:
    return float(np.log1p(P / s2) - P / (P + s2))


def _principal_term(B_x: int, P: float, s2: float) -> float:
    def f(t):
        return np.log((P + s2) / (s2 + P * t / 2.0)) + P * (t - 2.0) / (2.0 * (P + s2))

    return chi2_expectation(f, 2 * B_x, (0.0, 2.0), tol=1e-10)


def bnc_optimal_gmi(params: BlockNoncoherentParams) -> GmiEstimate:
    """Optimal GMI: ``(B-1)/B psi_rest + (1/B) E[psi(lambda_1)]`` with the chi-square quadrature."""
    B, P, s2 = params.B_x, params.P, params.sigma2
    value = (B - 1) / B * _psi_rest(P, s2) + _principal_term(B, P, s2) / B
    return GmiEstimate(value, 0.0, 1, "quadrature")


def bnc_elementwise_gmi(params: BlockNoncoherentParams) -> GmiEstimate:
    """Element-wise decoding GMI; does not depend on ``B_x``."""
    value = _principal_term(1, params.P, params.sigma2)
    return GmiEstimate(value, 0.0, 1, "quadrature")


def bnc_elementwise_limit() -> float:
    """High-SNR saturation value ``gamma - 1/e + E1(1)``."""
    return ELEMENTWISE_LIMIT


def bnc_lower_bound(params: BlockNoncoherentParams) -> float:
    return (params.B_x - 1) / params.B_x * _psi_rest(params.P, params.sigma2)


def bnc_large_block_limit(params: BlockNoncoherentParams) -> float:
    return _psi_rest(params.P, params.sigma2)


def bnc_squeeze_halfwidth(params: BlockNoncoherentParams) -> float:
    """Bound on ``|I_opt(B) - limit|`` from ``0 <= E[psi(lambda_1)] <= log(1 + P/s2)``."""
    P, s2 = params.P, params.sigma2
    return (np.log1p(P / s2) + P / (P + s2)) / params.B_x


def bnc_optimal_metric(y: np.ndarray, params: BlockNoncoherentParams, eps: float = DEFAULT_EPS) -> MetricFactors:
    """Two-branch optimal metric for one observation; drops the principal row above threshold.

    ``eps`` is accepted for interface symmetry: with zero conditional mean the
    principal direction is simply removed instead of truncated.
    """
    y = np.asarray(y, dtype=np.complex128)
    if y.shape != (params.B_x,):
        raise DomainError("y must have length B_x")
    P, s2 = params.P, params.sigma2
    lam, w = hermitian_eigh(bnc_posterior_stats(y, params).sigma)
    scales = np.full(params.B_x, 1.0 / np.sqrt(s2))
    wh = np.conj(w.T)
    if np.vdot(y, y).real >= P + s2:
        return MetricFactors(np.zeros(params.B_x - 1, dtype=complex), scales[1:, None] * wh[1:])
    scales[0] = np.sqrt(max(P - lam[0], 0.0) / (P * lam[0]))
    return MetricFactors(np.zeros(params.B_x, dtype=complex), scales[:, None] * wh)


def bnc_metric_provider(params: BlockNoncoherentParams):
    """Batched optimal metric with the dropped row kept as zeros (same argmin and GMI)."""
    P, s2 = params.P, params.sigma2

    def metric(y: np.ndarray, v=None) -> MetricFactors:
        y = np.atleast_2d(np.asarray(y, dtype=np.complex128))
        lam, w = hermitian_eigh(bnc_posterior_stats(y, params).sigma)
        scales = np.full(lam.shape, 1.0 / np.sqrt(s2))
        below = np.sum(np.abs(y) ** 2, axis=-1) < P + s2
        l1 = lam[:, 0]
        scales[:, 0] = np.where(below, np.sqrt(np.clip(P - l1, 0.0, None) / (P * l1)), 0.0)
        f = scales[..., :, None] * np.conj(np.swapaxes(w, -1, -2))
        return MetricFactors(np.zeros(y.shape, dtype=complex), f)

    return metric


class BlockNoncoherentChannel(ChannelModel):
    def __init__(self, params: BlockNoncoherentParams):
        self.params = params
        self.B_x = params.B_x
        self.P = params.P

    def respond(self, x, rng, theta=None):
        x = np.atleast_2d(x)
        n = x.shape[0]
        th = rng.uniform(0.0, 2 * np.pi, size=n) if theta is None else np.broadcast_to(theta, (n,))
        noise = complex_normal(rng, x.shape, self.params.sigma2)
        return np.exp(1j * th)[:, None] * x + noise, None

    def posterior(self, y, v=None) -> PosteriorStats:
        return bnc_posterior_stats(y, self.params)

    def _colored_parts(self, lambdas):
        lam = check_lambdas(lambdas, self.B_x)
        p = self.P * lam
        k = p / (p + self.params.sigma2)
        cvar = p * self.params.sigma2 / (p + self.params.sigma2)
        return k, cvar

    def colored_posterior(self, y, v, lambdas) -> PosteriorStats:
        k, cvar = self._colored_parts(lambdas)
        ky = np.asarray(y) * k
        sigma = np.diag(cvar) + ky[..., :, None] * np.conj(ky[..., None, :])
        return PosteriorStats(np.zeros_like(ky), sigma)

    def colored_posterior_samples(self, y, v, lambdas, rng, m):
        k, cvar = self._colored_parts(lambdas)
        y = np.atleast_2d(y)
        n = y.shape[0]
        th = rng.uniform(0.0, 2 * np.pi, size=(n, m))
        mean = np.exp(-1j * th)[..., None] * (k * y)[:, None, :]
        return mean + complex_normal(rng, (n, m, self.B_x), 1.0) * np.sqrt(cvar)
