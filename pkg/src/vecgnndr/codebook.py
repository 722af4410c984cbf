"""Joint codebook and metric design over diagonal input covariances.

A codebook ``CN(0, P diag(lambdas))`` is reduced to the white case by the
whitening map ``mu -> Sigma^-1/2 mu``, ``S -> Sigma^-1/2 S Sigma^-1/2``. The
optimal GMI of the colored codebook, times ``B_x``, equals
``E[tr G(Sigma_hat)]`` with

    G(x) = -log(x / P)   for x < P,        G(x) = 1 - x / P   for x >= P,

and the first-order conditions of its maximisation under ``sum(lambdas) =
B_x`` read ``lambda_i = a_i / (nu - Delta_i)``. The fixed-point iteration
below alternates Monte Carlo estimates of ``a_i`` and ``Delta_i`` with a
bisection for the multiplier ``nu``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .core import PosteriorStats, inv_sqrtm
from .errors import ConvergenceError, DomainError
from .expectation import mean_and_stderr

TRACE_TOL = 1e-10


@dataclass(frozen=True)
class DiagonalCovariance:
    """Diagonal input covariance normalised to ``sum(lambdas) = B_x``."""

    lambdas: np.ndarray

    def __post_init__(self) -> None:
        lam = np.asarray(self.lambdas, dtype=float).ravel()
        if lam.size == 0 or np.any(~(lam > 0)):
            raise DomainError("lambdas must be positive")
        if abs(lam.sum() - lam.size) > TRACE_TOL * lam.size:
            raise DomainError(f"trace {lam.sum():.12g} differs from B_x = {lam.size}")
        object.__setattr__(self, "lambdas", lam)

    @classmethod
    def normalized(cls, values) -> "DiagonalCovariance":
        v = np.asarray(values, dtype=float)
        return cls(v * (v.size / v.sum()))

    @classmethod
    def uniform(cls, B_x: int) -> "DiagonalCovariance":
        return cls(np.ones(B_x))

    @property
    def B_x(self) -> int:
        return self.lambdas.size

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.lambdas)


def _as_sqrt_inv(Sigma) -> np.ndarray:
    S = np.asarray(Sigma.matrix if isinstance(Sigma, DiagonalCovariance) else Sigma, dtype=complex)
    if S.ndim == 1:
        S = np.diag(S)
    try:
        return inv_sqrtm(S)
    except DomainError as exc:
        raise DomainError("codebook covariance must be positive definite") from exc


def whiten_stats(mu_color, sigma_color, Sigma) -> PosteriorStats:
    """Posterior statistics of the whitened input ``Sigma^-1/2 X``."""
    w = _as_sqrt_inv(Sigma)
    mu = np.einsum("ij,...j->...i", w, np.asarray(mu_color, dtype=complex))
    sig = w @ np.asarray(sigma_color, dtype=complex) @ w
    return PosteriorStats(mu, sig)


def unwhiten_stats(stats: PosteriorStats, Sigma) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`whiten_stats`."""
    w = np.linalg.inv(_as_sqrt_inv(Sigma))
    return np.einsum("ij,...j->...i", w, stats.mu), w @ stats.sigma @ w


def score(x, lambdas, P: float = 1.0) -> np.ndarray:
    """``d/d lambda_i log CN(x; 0, P diag(lambdas)) = |x_i|^2 / (P lambda_i^2) - 1/lambda_i``."""
    lam = np.asarray(lambdas, dtype=float)
    if np.any(~(lam > 0)):
        raise DomainError("lambdas must be positive")
    x = np.asarray(x)
    return np.abs(x) ** 2 / (P * lam**2) - 1.0 / lam


def centered_score(x_samples, lambdas, P: float = 1.0) -> np.ndarray:
    """Score minus its sample mean over the second-to-last axis (draws from X | y)."""
    s = score(x_samples, lambdas, P)
    return s - s.mean(axis=-2, keepdims=True)


def G_fn(x, P: float):
    x = np.asarray(x, dtype=float)
    r = x / P
    return np.where(x < P, -np.log(np.where(x < P, r, 1.0)), 1.0 - r)


def G_prime(x, P: float):
    x = np.asarray(x, dtype=float)
    return np.where(x < P, -1.0 / np.where(x < P, x, 1.0), -1.0 / P)


def _spectral(sigma_hat: np.ndarray, P: float):
    w, v = np.linalg.eigh(0.5 * (sigma_hat + np.conj(np.swapaxes(sigma_hat, -1, -2))))
    w = np.maximum(w, np.finfo(float).tiny)
    vh = np.conj(np.swapaxes(v, -1, -2))
    trG = np.sum(G_fn(w, P), axis=-1)
    Gp = np.einsum("...ij,...j,...jk->...ik", v, G_prime(w, P), vh)
    excess = np.einsum("...ij,...j,...ji->...i", v, np.maximum(w - P, 0.0), vh).real
    return trG, Gp, excess


@dataclass(frozen=True)
class DeltaEstimate:
    """Monte Carlo estimates for one covariance: ``Delta_i``, ``a_i`` and the objective."""

    delta: np.ndarray
    delta_se: np.ndarray
    a: np.ndarray
    a_se: np.ndarray
    objective: float
    objective_se: float
    n_samples: int


def delta_all(
    channel, Sigma: DiagonalCovariance, n_samples: int, rng: np.random.Generator, n_inner: int = 64
) -> DeltaEstimate:
    """Estimate every ``Delta_i`` together with ``a_i = 1 + E[(Sigma_hat - P)_+]_ii / P``.

    Outer draws come from the colored codebook; the inner expectation over
    ``X | y`` uses ``n_inner`` posterior samples and the exact conditional
    score mean. Channels flagged ``gaussian_posterior`` get the inner term in
    closed form.
    """
    if n_inner < 16:
        raise DomainError("inner sample count must be at least 16")
    if n_samples < 100:
        raise DomainError("n_samples must be at least 100")
    lam = Sigma.lambdas
    P = channel.P
    d = channel.sample_colored(lam, rng, n_samples)
    st = channel.colored_posterior(d.y, d.v, lam)
    mu, sig = st.mu, st.sigma
    rs = 1.0 / np.sqrt(lam)
    sigma_hat = sig * rs[:, None] * rs[None, :]
    trG, Gp, excess = _spectral(sigma_hat, P)
    e_abs2 = np.real(np.diagonal(sig, axis1=-2, axis2=-1)) + np.abs(mu) ** 2
    e_score = e_abs2 / (P * lam**2) - 1.0 / lam
    if getattr(channel, "gaussian_posterior", False):
        # Gaussian X | y: E[q S_tilde_i | y] = (Sigma_hat G' Sigma_hat)_ii / (P lambda_i)
        inner = np.real(np.einsum("nij,njk,nki->ni", sigma_hat, Gp, sigma_hat)) / (P * lam)
    else:
        xs = channel.colored_posterior_samples(d.y, d.v, lam, rng, n_inner)
        zh = (xs - mu[:, None, :]) * rs
        q = np.real(np.einsum("nmi,nij,nmj->nm", np.conj(zh), Gp, zh))
        s_tilde = score(xs, lam, P) - e_score[:, None, :]
        inner = np.mean(q[..., None] * s_tilde, axis=1)
    # E[S_i] = 0, so centring trG is a free control variate
    per = inner + (trG - trG.mean())[:, None] * e_score
    a_per = 1.0 + excess / P
    delta = per.mean(axis=0)
    delta_se = per.std(axis=0, ddof=1) / np.sqrt(n_samples)
    obj, obj_se = mean_and_stderr(trG / Sigma.B_x)
    return DeltaEstimate(
        delta=delta,
        delta_se=delta_se,
        a=a_per.mean(axis=0),
        a_se=a_per.std(axis=0, ddof=1) / np.sqrt(n_samples),
        objective=obj,
        objective_se=obj_se,
        n_samples=n_samples,
    )


def delta_i(channel, Sigma: DiagonalCovariance, i: int, n_samples: int, rng: np.random.Generator, n_inner: int = 64):
    """``(Delta_i, std_err)`` for one component."""
    if not 0 <= i < Sigma.B_x:
        raise DomainError("component index out of range")
    est = delta_all(channel, Sigma, n_samples, rng, n_inner)
    return float(est.delta[i]), float(est.delta_se[i])


def color_cov_derivative(channel, y, v, Sigma: DiagonalCovariance, i: int, rng: np.random.Generator, m: int = 100_000):
    """Monte Carlo ``d Sigma_color / d lambda_i = E[(X - mu)(X - mu)^H S~_i | y]`` at one observation.

    Returns the estimate and the entrywise standard error.
    """
    lam = Sigma.lambdas
    y = np.atleast_2d(y)
    st = channel.colored_posterior(y, v, lam)
    xs = channel.colored_posterior_samples(y, v, lam, rng, m)[0]
    mu = st.mu[0]
    e_s = (np.real(st.sigma[0, i, i]) + abs(mu[i]) ** 2) / (channel.P * lam[i] ** 2) - 1.0 / lam[i]
    s_t = np.abs(xs[:, i]) ** 2 / (channel.P * lam[i] ** 2) - 1.0 / lam[i] - e_s
    z = xs - mu
    terms = z[:, :, None] * np.conj(z[:, None, :]) * s_t[:, None, None]
    se = np.sqrt(terms.real.var(axis=0, ddof=1) + terms.imag.var(axis=0, ddof=1)) / np.sqrt(m)
    return terms.mean(axis=0), se


def solve_multiplier(a: np.ndarray, delta: np.ndarray, B_x: int, tol: float = 1e-14) -> float:
    """Root ``nu`` of ``sum_i a_i / (nu - Delta_i) = B_x`` with ``nu > max Delta``."""
    a = np.asarray(a, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if np.any(a <= 0):
        raise DomainError("a_i must be positive")
    base = float(np.max(delta))

    def h(nu):
        return float(np.sum(a / (nu - delta))) - B_x

    lo, width = base + 1e-9, 1e3
    if h(lo) < 0:
        lo = base + 1e-300
    for _ in range(60):
        hi = base + width
        if h(hi) < 0:
            break
        width *= 10.0
    else:
        raise ConvergenceError("no feasible multiplier in the search bracket")
    if h(lo) <= 0:
        return lo
    return float(optimize.brentq(h, lo, hi, xtol=tol * max(1.0, abs(hi)), rtol=4 * np.finfo(float).eps))


@dataclass(frozen=True)
class StepInfo:
    nu: float
    estimate: DeltaEstimate
    residual: np.ndarray
    residual_se: np.ndarray


def fixed_point_step(
    channel,
    current: DiagonalCovariance,
    P: float | None = None,
    n_samples: int = 20_000,
    rng: np.random.Generator | None = None,
    n_inner: int = 64,
):
    """One undamped application of ``lambda_i = a_i / (nu - Delta_i)``.

    Returns ``(new covariance, info)`` where ``info`` carries ``nu``, the
    Monte Carlo estimate and the stationarity residual at ``current``.
    """
    if P is not None and not np.isclose(P, channel.P):
        raise DomainError("P must match the channel power")
    rng = np.random.default_rng() if rng is None else rng
    est = delta_all(channel, current, n_samples, rng, n_inner)
    B = current.B_x
    nu = solve_multiplier(est.a, est.delta, B)
    lam = est.a / (nu - est.delta)
    lam = lam * (B / lam.sum())
    resid = est.a / current.lambdas + est.delta - nu
    resid_se = np.sqrt((est.a_se / current.lambdas) ** 2 + est.delta_se**2)
    info = StepInfo(nu=nu, estimate=est, residual=resid, residual_se=resid_se)
    return DiagonalCovariance(lam), info


@dataclass
class CodebookHistory:
    lambdas: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    objective_se: list = field(default_factory=list)
    nu: list = field(default_factory=list)
    converged: bool = False
    last_info: StepInfo | None = None


def optimize_codebook(
    channel,
    start: DiagonalCovariance | None = None,
    n_samples: int = 20_000,
    rng: np.random.Generator | None = None,
    damping: float = 0.5,
    tol: float = 1e-3,
    max_iter: int = 100,
    n_inner: int = 64,
    seed_stream=None,
) -> tuple[DiagonalCovariance, CodebookHistory]:
    """Damped fixed-point iteration; stops when no component moves by more than ``tol``.

    ``seed_stream`` (a callable ``k -> Generator``) gives each iteration its
    own random stream; otherwise ``rng`` is consumed sequentially.
    """
    if not 0 < damping <= 1:
        raise DomainError("damping must lie in (0, 1]")
    cur = start or DiagonalCovariance.uniform(channel.B_x)
    rng = np.random.default_rng() if rng is None else rng
    hist = CodebookHistory()
    for k in range(max_iter):
        r = seed_stream(k) if seed_stream is not None else rng
        step, info = fixed_point_step(channel, cur, None, n_samples, r, n_inner)
        new = DiagonalCovariance.normalized(damping * step.lambdas + (1.0 - damping) * cur.lambdas)
        hist.lambdas.append(cur.lambdas.copy())
        hist.objective.append(info.estimate.objective)
        hist.objective_se.append(info.estimate.objective_se)
        hist.nu.append(info.nu)
        hist.last_info = info
        moved = float(np.max(np.abs(new.lambdas - cur.lambdas)))
        cur = new
        if moved < tol:
            hist.converged = True
            break
    hist.lambdas.append(cur.lambdas.copy())
    return cur, hist


def codebook_objective(channel, Sigma: DiagonalCovariance, n_samples: int, rng: np.random.Generator):
    """``(J, std_err)`` with ``J = E[tr G(Sigma_hat)] / B_x``, the optimal GMI of the colored codebook."""
    if n_samples < 100:
        raise DomainError("n_samples must be at least 100")
    lam = Sigma.lambdas
    d = channel.sample_colored(lam, rng, n_samples)
    st = channel.colored_posterior(d.y, d.v, lam)
    rs = 1.0 / np.sqrt(lam)
    trG = _spectral(st.sigma * rs[:, None] * rs[None, :], channel.P)[0]
    return mean_and_stderr(trG / Sigma.B_x)


def water_filling(gains2: np.ndarray, P: float, sigma2: float) -> np.ndarray:
    """Classical water-filling over parallel channels with power gains ``gains2`` (sum = B_x)."""
    inv = sigma2 / (np.asarray(gains2, dtype=float) * P)
    B = inv.size
    order = np.sort(inv)
    for k in range(B, 0, -1):
        level = (B + order[:k].sum()) / k
        if level > order[k - 1]:
            break
    return np.maximum(level - inv, 0.0)
