"""GMI of a fixed metric and synthesis of the GMI-optimal metric.

For a metric ``(g, f)`` with SVD ``f = U diag(s) W^H`` and ``g' = U^H g`` the
empirical objective at ``theta < 0`` is the sample mean of

    theta ||g - f x||^2 - sum_i theta |g'_i|^2 / (1 - theta P s_i^2)
                        + sum_i log(1 - theta P s_i^2),

and the GMI is its maximum over ``theta`` divided by ``B_x``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize

from .core import (
    DEFAULT_EPS,
    GmiEstimate,
    JointDraws,
    MetricFactors,
    PosteriorStats,
    hermitian_eigh,
    psi,
    truncate_spectrum,
)
from .errors import AssumptionViolation, DomainError, NumericalError

JointSampler = Callable[[np.random.Generator, int], JointDraws]
MetricMap = Callable[[np.ndarray, "np.ndarray | None"], MetricFactors]
StatsSampler = Callable[[np.random.Generator, int], PosteriorStats]

IDENTITY_TOL = 1e-10


@dataclass(frozen=True)
class ThetaTerms:
    """Per-sample ingredients of the fixed-metric objective.

    d: ``||g - f x||^2`` (n,); a: ``|U^H g|^2`` (n, K); s2: squared singular
    values padded with zeros to K (n, K).
    """

    d: np.ndarray
    a: np.ndarray
    s2: np.ndarray
    B_x: int

    def samples(self, theta: float, P: float) -> np.ndarray:
        tps = -theta * P * self.s2
        return theta * self.d - np.sum(theta * self.a / (1.0 + tps), axis=-1) + np.sum(np.log1p(tps), axis=-1)

    def objective(self, theta: float, P: float) -> float:
        return float(np.mean(self.samples(theta, P)))


@dataclass(frozen=True)
class ThetaResult:
    theta: float
    value: float
    flags: tuple[str, ...] = ()


def metric_terms(x: np.ndarray, metric: MetricFactors) -> ThetaTerms:
    """Build :class:`ThetaTerms` from inputs ``x`` (n, B_x) and a batched metric."""
    x = np.asarray(x, dtype=np.complex128)
    g, f = metric.g, metric.f
    if g.ndim == 1:
        g, f = np.broadcast_to(g, (x.shape[0],) + g.shape), np.broadcast_to(f, (x.shape[0],) + f.shape)
    d = MetricFactors(g, f).distance(x)
    u, s, _ = np.linalg.svd(f)
    gp = np.einsum("nji,nj->ni", np.conj(u), g)
    a = gp.real**2 + gp.imag**2
    s2 = np.zeros_like(a)
    k = s.shape[-1]
    s2[:, :k] = s**2
    terms = ThetaTerms(d=d, a=a, s2=s2, B_x=x.shape[-1])
    if not (np.all(np.isfinite(d)) and np.all(np.isfinite(a)) and np.all(np.isfinite(s2))):
        raise NumericalError("non-finite metric terms")
    return terms


def maximize_theta(
    terms: ThetaTerms,
    P: float,
    theta_max: float = 1.0,
    tol: float = 1e-10,
    max_doublings: int = 60,
) -> ThetaResult:
    """Maximise the concave empirical objective over ``theta < 0``.

    The search interval ``(-2 Theta, 0)`` is grown by doubling ``Theta`` until
    the objective decreases past ``-Theta``; bounded Brent search then runs to
    tolerance ``tol * Theta``.
    ``value`` is reported per input symbol.
    """
    if terms.d.size == 0:
        raise DomainError("empty sample set")

    def fn(t: float) -> float:
        return terms.objective(t, P)

    flags: list[str] = []
    big = theta_max
    doublings = 0
    f1, f2 = fn(-big), fn(-2 * big)
    while f2 >= f1 and doublings < max_doublings:
        if f2 == f1 == 0.0:
            break
        big *= 2
        doublings += 1
        f1, f2 = f2, fn(-2 * big)
    if doublings == max_doublings and f2 >= f1:
        flags.append("lower_boundary")
    res = optimize.minimize_scalar(
        lambda t: -fn(t), bounds=(-2.0 * big, 0.0), method="bounded", options={"xatol": tol * big, "maxiter": 500}
    )
    theta, val = float(res.x), -float(res.fun)
    if val <= 0.0:
        flags.append("degenerate")
        return ThetaResult(theta=theta, value=0.0, flags=tuple(flags))
    return ThetaResult(theta=theta, value=val / terms.B_x, flags=tuple(flags))


@dataclass(frozen=True)
class FixedMetricGmiInput:
    joint_sampler: JointSampler
    metric: MetricMap
    P: float
    n_samples: int

    def __post_init__(self) -> None:
        if self.n_samples < 100:
            raise DomainError("n_samples must be at least 100")
        if not self.P > 0:
            raise DomainError("P must be positive")


def gmi_fixed_metric(inp: FixedMetricGmiInput, rng: np.random.Generator, theta: float | None = None) -> GmiEstimate:
    """Monte Carlo GMI of a fixed metric; ``theta=None`` optimises over theta."""
    draws = inp.joint_sampler(rng, inp.n_samples)
    metric = inp.metric(draws.y, draws.v)
    terms = metric_terms(draws.x, metric)
    return gmi_from_terms(terms, inp.P, theta)


def gmi_from_terms(terms: ThetaTerms, P: float, theta: float | None = None) -> GmiEstimate:
    n = terms.d.shape[0]
    flags: tuple[str, ...] = ()
    if theta is None:
        res = maximize_theta(terms, P)
        flags = res.flags
        if "degenerate" in flags:
            return GmiEstimate(0.0, 0.0, n, "mc", flags)
        theta = res.theta
    elif not theta < 0:
        raise DomainError("theta must be negative")
    per = terms.samples(theta, P) / terms.B_x
    se = float(np.std(per, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return GmiEstimate(float(np.mean(per)), se, n, "mc", flags)


def optimal_metric(stats: PosteriorStats, P: float, eps: float = DEFAULT_EPS) -> MetricFactors:
    """GMI-optimal metric built on the eps-truncated spectrum of ``stats.sigma``."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    ts = truncate_spectrum(stats.sigma, P, eps)
    t, gap = ts.trunc_eigvals, ts.gaps
    if np.any(t <= 0) or np.any(gap <= 0):
        raise NumericalError("truncated eigenvalue outside (0, P)")
    wh = np.conj(np.swapaxes(ts.eigvecs, -1, -2))
    f = np.sqrt(gap / (P * t))[..., :, None] * wh
    g = np.sqrt(P / (gap * t)) * np.einsum("...ij,...j->...i", wh, stats.mu)
    return MetricFactors(g, f)


def psi_form_integrand(stats: PosteriorStats, P: float) -> np.ndarray:
    """Per-sample ``B^-1 sum psi(lambda_i) + ||mu||^2 / (B P)``."""
    lam = hermitian_eigh(stats.sigma)[0]
    B = stats.B_x
    mu2 = np.sum(np.abs(stats.mu) ** 2, axis=-1)
    return np.sum(psi(lam, P), axis=-1) / B + mu2 / (B * P)


def logdet_form_integrand(stats: PosteriorStats, P: float) -> np.ndarray:
    """Per-sample log-determinant form with the above-P correction."""
    lam = hermitian_eigh(stats.sigma)[0]
    B = stats.B_x
    r = lam / P
    corr = np.where(lam >= P, -np.log(r) + r - 1.0, 0.0)
    return np.sum(-np.log(r) - corr, axis=-1) / B


def orthogonality_residual(stats: PosteriorStats, P: float) -> np.ndarray:
    """``(tr sigma + ||mu||^2) / (B P) - 1``; zero-mean under the output marginal."""
    tr = np.trace(stats.sigma, axis1=-2, axis2=-1).real
    mu2 = np.sum(np.abs(stats.mu) ** 2, axis=-1)
    return (tr + mu2) / (stats.B_x * P) - 1.0


def optimal_gmi_from_stats(stats: PosteriorStats, P: float, method: str = "mc") -> GmiEstimate:
    """Optimal GMI from an already sampled batch of posterior statistics."""
    stats = stats.as_batch().validate()
    n = len(stats)
    a = psi_form_integrand(stats, P)
    b = logdet_form_integrand(stats, P)
    c = orthogonality_residual(stats, P)
    err = np.abs(a - b - c)
    if np.any(err > IDENTITY_TOL * np.maximum(1.0, np.abs(a) + np.abs(c))):
        raise NumericalError(f"equivalent-form mismatch {err.max():.3g}")
    # c has zero mean, so subtracting its regression on a keeps the target and cuts variance
    beta = 0.0
    if n > 2:
        vc = float(np.var(c))
        if vc > 0:
            beta = float(np.mean((a - a.mean()) * (c - c.mean())) / vc)
    h = a - beta * c
    se = float(np.std(h, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return GmiEstimate(float(np.mean(h)), se, n, method)


def optimal_gmi(stats_sampler: StatsSampler, P: float, n_samples: int, rng: np.random.Generator) -> GmiEstimate:
    """Monte Carlo estimate of the optimal GMI."""
    if n_samples < 100:
        raise DomainError("n_samples must be at least 100")
    return optimal_gmi_from_stats(stats_sampler(rng, n_samples), P)


def optimal_gmi_closed(stats_sampler: StatsSampler, P: float, n_samples: int, rng: np.random.Generator) -> GmiEstimate:
    """Log-determinant form, valid when every conditional eigenvalue is below P."""
    if n_samples < 1:
        raise DomainError("n_samples must be positive")
    stats = stats_sampler(rng, n_samples).as_batch().validate()
    lam = hermitian_eigh(stats.sigma)[0]
    bad = np.nonzero(lam[:, 0] >= P)[0]
    if bad.size:
        k = int(bad[0])
        raise AssumptionViolation(
            f"sample {k}: largest conditional eigenvalue {lam[k, 0]:.6g} >= P = {P:.6g}"
        )
    vals = np.sum(np.log(P / lam), axis=-1) / stats.B_x
    n = vals.size
    se = float(np.std(vals, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return GmiEstimate(float(np.mean(vals)), se, n, "mc")
