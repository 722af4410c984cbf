"""Gibbs sampling with a Metropolis step on the phase increments.

Each iteration draws ``x | phi, y`` exactly (componentwise complex Gaussian)
and then proposes ``z* = z + step * v`` for the standardized phase
increments, accepting with the usual likelihood-times-prior ratio. The
post-burn-in ``x`` draws of all chains are pooled into a mean and a
covariance normalised by the number of retained draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..channels.pnc import PhaseNoiseChannel, PhaseNoiseParams
from ..core import PosteriorStats
from ..errors import AcceptanceRateError, DomainError
from ..expectation import derive_stream, parallel_map
from ._backend import get_kernel

ACCEPT_BOUNDS = (0.05, 0.95)


@dataclass(frozen=True)
class McmcConfig:
    n_iters: int = 10_000
    burn_in: int = 2_000
    step: float = 0.1
    n_chains: int = 4
    seed: int = 0
    adapt: bool = True
    target_accept: float = 0.3
    prior_only: bool = False
    check_acceptance: bool = True
    backend: str | None = None

    def __post_init__(self) -> None:
        if not (0 <= self.burn_in < self.n_iters):
            raise DomainError("need 0 <= burn_in < n_iters")
        if not self.step > 0:
            raise DomainError("step must be positive")
        if self.n_chains < 1:
            raise DomainError("n_chains must be at least 1")
        if not 0 < self.target_accept < 1:
            raise DomainError("target_accept must lie in (0, 1)")

    @property
    def n_eff(self) -> int:
        return self.n_iters - self.burn_in


@dataclass(frozen=True)
class McmcDiagnostics:
    acceptance_rate: float
    per_chain_means: list
    split_spread: float
    per_chain_acceptance: list = field(default_factory=list)
    final_steps: list = field(default_factory=list)
    z_samples: np.ndarray | None = None

    @property
    def mean_std_err(self) -> np.ndarray:
        """Between-chain standard error of the pooled mean (per entry, complex modulus)."""
        m = np.asarray(self.per_chain_means)
        if m.shape[0] < 2:
            return np.full(m.shape[-1], np.nan)
        return np.sqrt(np.var(m.real, axis=0, ddof=1) + np.var(m.imag, axis=0, ddof=1)) / np.sqrt(m.shape[0])


def _draws(rng: np.random.Generator, n_iters: int, B: int):
    # fixed order: x normals, proposal normals, uniforms
    xnorm = rng.standard_normal((n_iters, B, 2))
    vnorm = rng.standard_normal((n_iters, B))
    unif = rng.random(n_iters)
    return xnorm, vnorm, unif


def run_single_chain(y, params: PhaseNoiseParams, config: McmcConfig, rng: np.random.Generator):
    """One chain; returns ``(x_samples, z_samples, n_accepted, final_step)``."""
    y = np.ascontiguousarray(np.asarray(y, dtype=np.complex128).ravel())
    B = y.size
    xnorm, vnorm, unif = _draws(rng, config.n_iters, B)
    n_eff = config.n_eff
    out_re = np.empty((n_eff, B))
    out_im = np.empty((n_eff, B))
    z_out = np.empty((n_eff, B))
    kernel = get_kernel(config.backend, B)
    accepted, final = kernel(
        np.ascontiguousarray(y.real),
        np.ascontiguousarray(y.imag),
        float(params.P),
        float(params.sigma2),
        float(params.c),
        int(config.burn_in),
        float(config.step),
        bool(config.adapt),
        float(config.target_accept),
        xnorm,
        vnorm,
        unif,
        bool(config.prior_only),
        out_re,
        out_im,
        z_out,
    )
    return out_re + 1j * out_im, z_out, int(accepted), float(final)


def mcmc_posterior(
    y,
    params: PhaseNoiseParams,
    config: McmcConfig = McmcConfig(),
    stream: int = 0,
    keep_z: bool = False,
) -> tuple[PosteriorStats, McmcDiagnostics]:
    """Posterior mean and covariance of X given one observation ``y``.

    Chain ``j`` draws from ``derive_stream(config.seed, stream * n_chains + j)``.
    """
    y = np.asarray(y, dtype=np.complex128).ravel()
    if y.size != params.B_x:
        raise DomainError("y must have length B_x")
    xs, zs, acc, steps = [], [], [], []
    for j in range(config.n_chains):
        rng = derive_stream(config.seed, stream * config.n_chains + j)
        x, z, a, s = run_single_chain(y, params, config, rng)
        xs.append(x)
        zs.append(z)
        acc.append(a / config.n_eff)
        steps.append(s)
    pooled = np.concatenate(xs)
    mu = pooled.mean(axis=0)
    d = pooled - mu
    sigma = d.T @ np.conj(d) / pooled.shape[0]
    chain_means = [x.mean(axis=0) for x in xs]
    spread = max(
        (float(np.linalg.norm(a - b)) for i, a in enumerate(chain_means) for b in chain_means[i + 1 :]),
        default=0.0,
    )
    rate = float(np.mean(acc))
    diag = McmcDiagnostics(
        acceptance_rate=rate,
        per_chain_means=chain_means,
        split_spread=spread,
        per_chain_acceptance=acc,
        final_steps=steps,
        z_samples=np.concatenate(zs) if keep_z else None,
    )
    lo, hi = ACCEPT_BOUNDS
    if config.check_acceptance and not (lo <= rate <= hi):
        raise AcceptanceRateError(
            f"post-burn-in acceptance rate {rate:.3f} outside [{lo}, {hi}]; retune the proposal step"
        )
    return PosteriorStats(mu, 0.5 * (sigma + sigma.conj().T)), diag


def mcmc_posterior_batch(
    ys, params: PhaseNoiseParams, config: McmcConfig = McmcConfig(), threads: int | None = None, offset: int = 0
) -> tuple[PosteriorStats, list[McmcDiagnostics]]:
    """Run :func:`mcmc_posterior` for each row of ``ys`` (stream index = offset + row)."""
    ys = np.atleast_2d(np.asarray(ys, dtype=np.complex128))
    res = parallel_map(lambda k: mcmc_posterior(ys[k], params, config, stream=offset + k), range(ys.shape[0]), threads)
    stats = PosteriorStats(np.stack([r[0].mu for r in res]), np.stack([r[0].sigma for r in res]))
    return stats, [r[1] for r in res]


class McmcPhaseNoiseChannel(PhaseNoiseChannel):
    """Phase-noise channel whose posterior statistics come from the chain sampler."""

    def __init__(self, params: PhaseNoiseParams, config: McmcConfig = McmcConfig(), threads: int | None = None):
        super().__init__(params)
        self.config = config
        self.threads = threads
        self._calls = 0
        self.diagnostics: list[McmcDiagnostics] = []

    def posterior(self, y, v=None) -> PosteriorStats:
        y = np.atleast_2d(y)
        offset = self._calls
        self._calls += y.shape[0]
        stats, diags = mcmc_posterior_batch(y, self.params, self.config, self.threads, offset)
        self.diagnostics.extend(diags)
        return stats

    def with_config(self, **changes) -> "McmcPhaseNoiseChannel":
        return McmcPhaseNoiseChannel(self.params, replace(self.config, **changes), self.threads)
