"""Additive colored Gaussian noise channel ``y = A x + n`` with known ``A``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import GmiEstimate, MetricFactors, PosteriorStats, inv_sqrtm
from ..errors import DomainError
from ..expectation import complex_normal
from .base import ChannelModel, check_lambdas


@dataclass(frozen=True)
class AcgncParams:
    A: np.ndarray
    Sigma_noise: np.ndarray
    P: float

    def __post_init__(self) -> None:
        A = np.atleast_2d(np.asarray(self.A, dtype=np.complex128))
        S = np.atleast_2d(np.asarray(self.Sigma_noise, dtype=np.complex128))
        if S.shape != (A.shape[0], A.shape[0]):
            raise DomainError("Sigma_noise must be B_y x B_y")
        if np.max(np.abs(S - S.conj().T)) > 1e-12 * max(np.max(np.abs(S)), 1e-300):
            raise DomainError("Sigma_noise must be Hermitian")
        if np.linalg.eigvalsh(0.5 * (S + S.conj().T)).min() <= 0:
            raise DomainError("Sigma_noise must be positive definite")
        if not self.P > 0:
            raise DomainError("P must be positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Sigma_noise", 0.5 * (S + S.conj().T))

    @property
    def B_x(self) -> int:
        return self.A.shape[1]

    @property
    def B_y(self) -> int:
        return self.A.shape[0]


def _gaussian_posterior(y, A, S_inv, prior_diag) -> PosteriorStats:
    """Posterior of ``x ~ CN(0, diag(prior_diag))`` given ``y = A x + n``."""
    prec = A.conj().T @ S_inv @ A + np.diag(1.0 / prior_diag)
    cov = np.linalg.inv(prec)
    cov = 0.5 * (cov + cov.conj().T)
    gain = cov @ A.conj().T @ S_inv
    mu = np.einsum("ij,...j->...i", gain, np.asarray(y, dtype=np.complex128))
    sigma = np.broadcast_to(cov, mu.shape + (mu.shape[-1],))
    return PosteriorStats(mu, sigma)


def acgnc_posterior_stats(y: np.ndarray, params: AcgncParams) -> PosteriorStats:
    S_inv = np.linalg.inv(params.Sigma_noise)
    return _gaussian_posterior(y, params.A, S_inv, np.full(params.B_x, params.P))


def acgnc_gmi_value(params: AcgncParams) -> float:
    """``B_x^-1 log det(P A^H Sigma^-1 A + I)``."""
    M = params.A.conj().T @ np.linalg.solve(params.Sigma_noise, params.A)
    _, logdet = np.linalg.slogdet(params.P * M + np.eye(params.B_x))
    return float(logdet / params.B_x)


def acgnc_optimal(params: AcgncParams):
    """Closed-form optimal GMI and the metric ``f = Lambda W^H``, ``g(y) = U^H Sigma^-1/2 y``."""
    if params.B_y != params.B_x:
        raise DomainError("the closed-form metric needs B_y == B_x")
    w_inv = inv_sqrtm(params.Sigma_noise)
    U, s, Wh = np.linalg.svd(w_inv @ params.A)
    f = s[:, None] * Wh
    proj = U.conj().T @ w_inv

    def metric(y: np.ndarray, v=None) -> MetricFactors:
        y = np.asarray(y, dtype=np.complex128)
        g = np.einsum("ij,...j->...i", proj, y)
        return MetricFactors(g, np.broadcast_to(f, g.shape + (params.B_x,)))

    return GmiEstimate(acgnc_gmi_value(params), 0.0, 1, "closed"), metric


def acgnc_ml_distance(y: np.ndarray, x: np.ndarray, params: AcgncParams) -> np.ndarray:
    """``(y - A x)^H Sigma^-1 (y - A x)`` with broadcasting."""
    r = np.asarray(y) - np.einsum("ij,...j->...i", params.A, x)
    S_inv = np.linalg.inv(params.Sigma_noise)
    return np.real(np.einsum("...i,ij,...j->...", np.conj(r), S_inv, r))


class AcgncChannel(ChannelModel):
    gaussian_posterior = True

    def __init__(self, params: AcgncParams):
        self.params = params
        self.B_x = params.B_x
        self.P = params.P
        self._S_inv = np.linalg.inv(params.Sigma_noise)
        self._S_half = np.linalg.cholesky(params.Sigma_noise)

    def respond(self, x, rng):
        x = np.atleast_2d(x)
        n = complex_normal(rng, (x.shape[0], self.params.B_y)) @ self._S_half.T
        return x @ self.params.A.T + n, None

    def posterior(self, y, v=None) -> PosteriorStats:
        return _gaussian_posterior(y, self.params.A, self._S_inv, np.full(self.B_x, self.P))

    def colored_posterior(self, y, v, lambdas) -> PosteriorStats:
        lam = check_lambdas(lambdas, self.B_x)
        return _gaussian_posterior(y, self.params.A, self._S_inv, self.P * lam)

    def colored_posterior_samples(self, y, v, lambdas, rng, m):
        post = self.colored_posterior(np.atleast_2d(y), v, lambdas)
        L = np.linalg.cholesky(post.sigma[0])
        z = complex_normal(rng, (post.mu.shape[0], m, self.B_x))
        return post.mu[:, None, :] + z @ L.T


class StateAcgncChannel(ChannelModel):
    """ACGNC whose matrix is drawn per block from a finite set and known at the receiver.

    The CSI ``v`` is the integer state index.
    """

    has_csi = True
    gaussian_posterior = True

    def __init__(self, matrices, probs, Sigma_noise, P: float):
        self.states = [AcgncParams(A, Sigma_noise, P) for A in matrices]
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (len(self.states),) or np.any(probs < 0) or not np.isclose(probs.sum(), 1.0):
            raise DomainError("probs must be a distribution over the states")
        self.probs = probs / probs.sum()
        self.B_x = self.states[0].B_x
        self.P = P
        self._channels = [AcgncChannel(p) for p in self.states]

    @property
    def state_degenerate(self) -> bool:
        return len(self.states) == 1

    def sample_states(self, rng, n):
        return rng.choice(len(self.states), size=n, p=self.probs)

    def respond(self, x, rng):
        x = np.atleast_2d(x)
        v = self.sample_states(rng, x.shape[0])
        y = np.empty((x.shape[0], self.states[0].B_y), dtype=complex)
        for k, ch in enumerate(self._channels):
            idx = np.nonzero(v == k)[0]
            if idx.size:
                y[idx] = ch.respond(x[idx], rng)[0]
        return y, v

    def respond_given_state(self, x, v, rng):
        x = np.atleast_2d(x)
        y, _ = self._channels[int(v)].respond(x, rng)
        return y, np.full(x.shape[0], int(v))

    def posterior(self, y, v=None) -> PosteriorStats:
        y = np.atleast_2d(y)
        v = np.broadcast_to(np.asarray(v), (y.shape[0],))
        mu = np.empty((y.shape[0], self.B_x), dtype=complex)
        sigma = np.empty((y.shape[0], self.B_x, self.B_x), dtype=complex)
        for k, ch in enumerate(self._channels):
            idx = np.nonzero(v == k)[0]
            if idx.size:
                st = ch.posterior(y[idx])
                mu[idx], sigma[idx] = st.mu, st.sigma
        return PosteriorStats(mu, sigma)
