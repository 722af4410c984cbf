"""Phase-noise channel: per-symbol phases follow a discrete Brownian motion within a block.

With an i.i.d. ``CN(0, P)`` input, ``diag(exp(i phi)) x`` has the same law as
``x`` for every ``phi``, so the output carries no information about the
phases and their posterior equals the prior. The conditional moments of X
given y are therefore available in closed form for every block length;
:func:`pnc_posterior_stats` implements them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import GmiEstimate, MetricFactors, PosteriorStats
from ..errors import DomainError
from ..expectation import complex_normal
from .base import ChannelModel, check_lambdas


@dataclass(frozen=True)
class PhaseNoiseParams:
    """``c = 0`` is accepted as the coherent limit."""

    B_x: int
    P: float
    sigma2: float
    c: float

    def __post_init__(self) -> None:
        if int(self.B_x) != self.B_x or self.B_x < 1:
            raise DomainError("B_x must be a positive integer")
        if not (self.P > 0 and self.sigma2 > 0):
            raise DomainError("P and sigma2 must be positive")
        if not self.c >= 0:
            raise DomainError("c must be nonnegative")

    @property
    def index(self) -> np.ndarray:
        return np.arange(1, self.B_x + 1, dtype=float)


def phase_covariance(params: PhaseNoiseParams) -> np.ndarray:
    i = params.index
    return params.c**2 * np.minimum.outer(i, i)


def sample_phases(params: PhaseNoiseParams, rng: np.random.Generator, n: int) -> np.ndarray:
    z = rng.standard_normal((n, params.B_x))
    return params.c * np.cumsum(z, axis=-1)


def pnc_sample(params: PhaseNoiseParams, rng: np.random.Generator):
    """One block ``(x, phi, y)`` with ``y = diag(exp(i phi)) x + n``."""
    x = complex_normal(rng, params.B_x, params.P)
    phi = sample_phases(params, rng, 1)[0]
    n = complex_normal(rng, params.B_x, params.sigma2)
    return x, phi, np.exp(1j * phi) * x + n


def pnc_correlations(params: PhaseNoiseParams) -> tuple[np.ndarray, np.ndarray]:
    """``(E[X Y^H], E[Y Y^H]) = (P diag(exp(-c^2 i / 2)), (P + s2) I)``."""
    rxy = params.P * np.diag(np.exp(-(params.c**2) * params.index / 2.0)).astype(complex)
    ryy = (params.P + params.sigma2) * np.eye(params.B_x, dtype=complex)
    return rxy, ryy


def _phase_cross_cov(params: PhaseNoiseParams) -> np.ndarray:
    i = params.index
    c2 = params.c**2
    return np.exp(-c2 * np.abs(np.subtract.outer(i, i)) / 2.0) - np.exp(-c2 * np.add.outer(i, i) / 2.0)


def _colored_posterior(y, params: PhaseNoiseParams, lam: np.ndarray) -> PosteriorStats:
    y = np.asarray(y, dtype=np.complex128)
    p = params.P * lam
    k = p / (p + params.sigma2)
    cvar = p * params.sigma2 / (p + params.sigma2)
    ky = k * y
    mu = np.exp(-(params.c**2) * params.index / 2.0) * ky
    sigma = np.diag(cvar) + ky[..., :, None] * np.conj(ky[..., None, :]) * _phase_cross_cov(params)
    return PosteriorStats(mu, sigma)


def pnc_posterior_stats(y: np.ndarray, params: PhaseNoiseParams) -> PosteriorStats:
    """Closed-form conditional mean and covariance of X given y (batched)."""
    return _colored_posterior(y, params, np.ones(params.B_x))


def pnc_linear_gmi(params: PhaseNoiseParams) -> tuple[GmiEstimate, np.ndarray, np.ndarray]:
    """Linear-processing GMI with its processing ``Gamma`` and scaling ``Pi`` (both diagonal).

    ``Pi`` has entries ``exp(-c^2 i/2) / sqrt(P(1 - exp(-c^2 i)) + s2)``, the
    matched scaling of the equivalent linear channel.
    """
    P, s2 = params.P, params.sigma2
    e = np.exp(-(params.c**2) * params.index)
    noise = P * (1.0 - e) + s2
    value = float(np.mean(np.log((P + s2) / noise)))
    gamma = np.diag(1.0 / np.sqrt(noise))
    pi = np.diag(np.sqrt(e) / np.sqrt(noise))
    return GmiEstimate(value, 0.0, 1, "closed"), gamma, pi


def pnc_linear_limit(B_x: int, c: float) -> float:
    """High-SNR limit of the linear-processing GMI."""
    e = np.exp(-(c**2) * np.arange(1, B_x + 1))
    return float(np.mean(-np.log1p(-e)))


def pnc_identity_A(params: PhaseNoiseParams) -> float:
    i = params.index
    return float(params.sigma2 + 2.0 * params.P / params.B_x * np.sum(1.0 - np.exp(-(params.c**2) * i / 2.0)))


def pnc_identity_objective(theta, params: PhaseNoiseParams):
    """Per-symbol objective ``h(theta)`` of the identity rule ``g = y, f = I``."""
    P, s2 = params.P, params.sigma2
    A = pnc_identity_A(params)
    theta = np.asarray(theta, dtype=float)
    return theta * A - (P + s2) * theta / (1.0 - theta * P) + np.log1p(-theta * P)


def pnc_identity_theta(params: PhaseNoiseParams) -> float:
    P, s2 = params.P, params.sigma2
    A = pnc_identity_A(params)
    return float((2 * A - P - np.sqrt(P**2 + 4 * A * (P + s2))) / (2 * A * P))


def pnc_identity_gmi(params: PhaseNoiseParams) -> GmiEstimate:
    value = float(pnc_identity_objective(pnc_identity_theta(params), params))
    return GmiEstimate(max(value, 0.0), 0.0, 1, "closed")


def pnc_identity_limit(B_x: int, c: float) -> float:
    """High-SNR limit ``s + 1 - sqrt(1 + 4s) + log(2 / (sqrt(1 + 4s) - 1))``."""
    s = 2.0 / B_x * float(np.sum(1.0 - np.exp(-(c**2) * np.arange(1, B_x + 1) / 2.0)))
    r = np.sqrt(1.0 + 4.0 * s)
    return float(s + 1.0 - r + np.log(2.0 / (r - 1.0)))


def identity_metric(y: np.ndarray, v=None) -> MetricFactors:
    """The mismatched rule ``g = y, f = I`` (batched)."""
    y = np.atleast_2d(np.asarray(y, dtype=np.complex128))
    eye = np.broadcast_to(np.eye(y.shape[-1], dtype=complex), y.shape + (y.shape[-1],))
    return MetricFactors(y, eye)


class PhaseNoiseChannel(ChannelModel):
    def __init__(self, params: PhaseNoiseParams):
        self.params = params
        self.B_x = params.B_x
        self.P = params.P

    def respond(self, x, rng, phi=None):
        x = np.atleast_2d(x)
        if phi is None:
            phi = sample_phases(self.params, rng, x.shape[0])
        noise = complex_normal(rng, x.shape, self.params.sigma2)
        return np.exp(1j * phi) * x + noise, None

    def posterior(self, y, v=None) -> PosteriorStats:
        return pnc_posterior_stats(y, self.params)

    def colored_posterior(self, y, v, lambdas) -> PosteriorStats:
        return _colored_posterior(y, self.params, check_lambdas(lambdas, self.B_x))

    def colored_posterior_samples(self, y, v, lambdas, rng, m):
        lam = check_lambdas(lambdas, self.B_x)
        p = self.P * lam
        k = p / (p + self.params.sigma2)
        cvar = p * self.params.sigma2 / (p + self.params.sigma2)
        y = np.atleast_2d(y)
        n = y.shape[0]
        phi = sample_phases(self.params, rng, n * m).reshape(n, m, self.B_x)
        mean = np.exp(-1j * phi) * (k * y)[:, None, :]
        return mean + complex_normal(rng, (n, m, self.B_x), 1.0) * np.sqrt(cvar)
