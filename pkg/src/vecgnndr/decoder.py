"""Gaussian random codebooks, the nearest-neighbour decoder and block-error-rate estimates.

Two estimators are provided. :func:`block_error_rate` draws an explicit
codebook per trial and decodes by exhaustive search, which caps the message
count. :func:`ensemble_error_rate` averages the exact random-coding error
probability over channel realisations: conditioned on the received sequence
and the transmitted codeword's metric, every competing codeword is an
independent draw, so the error probability is ``1 - (1 - p)^(M - 1)`` with
``p`` the lower tail of a sum of scaled noncentral chi-square variables,
evaluated by a saddlepoint approximation. This removes the cap on ``M``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .core import MetricFactors
from .errors import BudgetExceeded, ConvergenceError, DomainError
from .expectation import complex_normal

MAX_MESSAGES = 2**16
_Z95 = float(stats.norm.ppf(0.975))


@dataclass(frozen=True)
class Codebook:
    M: int
    L: int
    B_x: int
    words: np.ndarray
    P: float
    Sigma: np.ndarray

    @property
    def rate(self) -> float:
        """Nats per channel symbol."""
        return float(np.log(self.M) / (self.L * self.B_x))


def _check_cov(Sigma, B_x: int) -> np.ndarray:
    S = np.eye(B_x) if Sigma is None else np.atleast_2d(np.asarray(Sigma, dtype=complex))
    if S.shape != (B_x, B_x):
        raise DomainError("Sigma must be B_x x B_x")
    if np.max(np.abs(S - S.conj().T)) > 1e-12 * np.max(np.abs(S)):
        raise DomainError("Sigma must be Hermitian")
    if np.linalg.eigvalsh(S).min() <= 0:
        raise DomainError("Sigma must be positive definite")
    return S


def generate_codebook(M: int, L: int, B_x: int, P: float, Sigma=None, rng: np.random.Generator | None = None) -> Codebook:
    """``M`` codewords of ``L`` blocks, each block ``CN(0, P Sigma)``."""
    if M < 1 or L < 1 or B_x < 1:
        raise DomainError("M, L and B_x must be positive")
    if not P > 0:
        raise DomainError("P must be positive")
    S = _check_cov(Sigma, B_x)
    rng = np.random.default_rng() if rng is None else rng
    chol = np.linalg.cholesky(S)
    words = complex_normal(rng, (M, L, B_x), P) @ chol.T
    return Codebook(M, L, B_x, words, P, S)


def _metric_sequence(metric_provider, ys, vs) -> MetricFactors:
    ys = np.atleast_2d(ys)
    m = metric_provider(ys, vs)
    if m.g.ndim == 1:
        m = MetricFactors(m.g[None, :], m.f[None, :, :])
    return m


def metric_distances(metric: MetricFactors, words: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """``sum_l ||g_l - f_l x_l(m)||^2`` for every codeword ``m``."""
    out = np.empty(words.shape[0])
    for s in range(0, words.shape[0], chunk):
        fx = np.einsum("lkb,mlb->mlk", metric.f, words[s : s + chunk])
        r = metric.g[None] - fx
        out[s : s + chunk] = np.sum(r.real**2 + r.imag**2, axis=(1, 2))
    return out


def decode(metric_provider, codebook: Codebook, received) -> int:
    """Nearest-neighbour decision; ``received`` is ``(ys, vs)`` with ``ys`` of shape (L, B_y).

    ``np.argmin`` returns the first minimiser, so ties go to the smallest index.
    """
    ys, vs = received
    ys = np.atleast_2d(ys)
    if ys.shape[0] != codebook.L:
        raise DomainError("received sequence length must equal L")
    metric = _metric_sequence(metric_provider, ys, vs)
    return int(np.argmin(metric_distances(metric, codebook.words)))


def wilson_interval(errors: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    if trials < 1:
        raise DomainError("trials must be positive")
    p = errors / trials
    den = 1.0 + z**2 / trials
    centre = (p + z**2 / (2 * trials)) / den
    half = z * np.sqrt(p * (1 - p) / trials + z**2 / (4 * trials**2)) / den
    return centre - half, centre + half


@dataclass(frozen=True)
class ErrorRateResult:
    error_rate: float
    half_width: float
    M: float
    L: int
    trials: int
    method: str
    std_err: float = 0.0

    @property
    def interval(self) -> tuple[float, float]:
        return max(0.0, self.error_rate - self.half_width), min(1.0, self.error_rate + self.half_width)


def message_count(R: float, L: int, B_x: int) -> float:
    """``ceil(exp(R L B_x))`` as a float; ``inf`` once it leaves float range."""
    if R < 0:
        raise DomainError("rate must be nonnegative")
    if R == 0:
        return 1.0
    with np.errstate(over="ignore"):
        return float(np.ceil(np.exp(R * L * B_x) - 1e-9))


def block_error_rate(
    channel,
    metric_provider,
    R: float,
    L: int,
    trials: int,
    rng: np.random.Generator,
    max_messages: int = MAX_MESSAGES,
) -> ErrorRateResult:
    """Explicit-codebook Monte Carlo with a fresh codebook per trial (Wilson 95% half-width)."""
    if trials < 1:
        raise DomainError("trials must be positive")
    M = message_count(R, L, channel.B_x)
    if M > max_messages:
        raise BudgetExceeded(f"M = {M:.3g} exceeds the cap {max_messages}; use ensemble_error_rate")
    M = int(M)
    errors = 0
    for _ in range(trials):
        cb = generate_codebook(M, L, channel.B_x, channel.P, rng=rng)
        sent = int(rng.integers(M))
        ys, vs = channel.respond(cb.words[sent], rng)
        if M > 1 and decode(metric_provider, cb, (ys, vs)) != sent:
            errors += 1
    lo, hi = wilson_interval(errors, trials)
    return ErrorRateResult(errors / trials, 0.5 * (hi - lo), M, L, trials, "explicit")


# ---------------------------------------------------------------------------
# random-coding ensemble


def _quadratic_terms(metric: MetricFactors, P: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-direction ``|a|^2`` and variances ``v`` with ``||g - f X'||^2 = sum |a_k - b_k Z_k|^2``.

    Also returns the constant contribution of rows beyond the rank of ``f``.
    """
    u, s, _ = np.linalg.svd(metric.f)
    gp = np.einsum("...ji,...j->...i", np.conj(u), metric.g)
    a2 = gp.real**2 + gp.imag**2
    k = s.shape[-1]
    v = P * s**2
    const = np.sum(a2[..., k:], axis=-1)
    return a2[..., :k], v, const


def _cgf(t, a2, v):
    one = 1.0 - t[:, None] * v
    K = np.sum(t[:, None] * a2 / one - np.log(one), axis=1)
    K1 = np.sum(a2 / one**2 + v / one, axis=1)
    K2 = np.sum(2 * a2 * v / one**3 + v**2 / one**2, axis=1)
    return K, K1, K2


def log_lower_tail(a2: np.ndarray, v: np.ndarray, d: np.ndarray, const=None, iters: int = 200) -> np.ndarray:
    """``log Pr(sum_k |a_k - b_k Z_k|^2 + const <= d)`` for ``Z_k ~ CN(0, 1)``, ``v_k = |b_k|^2``.

    Rows of ``a2``/``v`` index independent problems. Uses the saddlepoint
    solution of ``K'(t) = d`` and the ``r*`` tail formula.
    """
    a2 = np.atleast_2d(np.asarray(a2, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    n = a2.shape[0]
    c0 = np.zeros(n) if const is None else np.asarray(const, dtype=float)
    d = np.asarray(d, dtype=float) - c0
    zero_v = v <= 0
    fixed = np.sum(np.where(zero_v, a2, 0.0), axis=1)
    out = np.full(n, -np.inf)
    feasible = d > fixed
    vmax = np.max(v, axis=1)
    mean = np.sum(a2 + v, axis=1)
    # bracket for t: (lo, hi) with K'(lo) < d < K'(hi)
    hi = np.where(d < mean, 0.0, 0.999999 / np.maximum(vmax, 1e-300))
    lo = np.where(d < mean, -1.0 / np.maximum(vmax, 1e-300), 0.0)
    act = feasible.copy()
    for _ in range(200):
        K1 = _cgf(lo, a2, v)[1]
        grow = act & (K1 > d)
        if not np.any(grow):
            break
        lo = np.where(grow, 2.0 * lo - 1.0 / np.maximum(vmax, 1e-300), lo)
    else:
        raise ConvergenceError("could not bracket the saddlepoint")
    t = 0.5 * (lo + hi)
    for _ in range(iters):
        K, K1, K2 = _cgf(t, a2, v)
        g = K1 - d
        lo = np.where(g < 0, t, lo)
        hi = np.where(g >= 0, t, hi)
        tn = t - g / K2
        bad = ~((tn > lo) & (tn < hi))
        tn = np.where(bad, 0.5 * (lo + hi), tn)
        if np.all(np.abs(tn - t) <= 1e-15 * np.maximum(1.0, np.abs(t))):
            t = tn
            break
        t = tn
    K, K1, K2 = _cgf(t, a2, v)
    arg = np.maximum(2.0 * (t * d - K), 0.0)
    w = np.sign(t) * np.sqrt(arg)
    u = t * np.sqrt(K2)
    small = np.abs(w) < 1e-6
    with np.errstate(divide="ignore", invalid="ignore"):
        rstar = w + np.log(u / w) / w
    # near the mean the tail is about 1/2; use the normal approximation there
    z = np.where(small, (d - K1) / np.sqrt(K2), rstar)
    res = special.log_ndtr(z)
    out = np.where(feasible, res, out)
    return out


def _log_block_error(log_p: np.ndarray, M: float, log_m1: float | None = None) -> np.ndarray:
    """``log(1 - (1 - p)^(M - 1))`` computed stably; ``log_m1`` covers ``M`` beyond float range."""
    if M <= 1:
        return np.full_like(log_p, -np.inf)
    if log_m1 is None:
        log_m1 = np.log(M - 1.0)
    p = np.exp(log_p)
    # (M-1) log(1-p) is exact enough through log1p when p is not tiny
    with np.errstate(divide="ignore"):
        s = np.where(p < 1e-12, -np.exp(log_m1 + log_p), (M - 1.0) * np.log1p(-np.minimum(p, 1.0 - 1e-300)))
        return np.log(-np.expm1(s))


def ensemble_error_rate(
    channel,
    metric_provider,
    R: float,
    L: int,
    trials: int,
    rng: np.random.Generator,
    M: float | None = None,
    chunk: int = 2000,
) -> ErrorRateResult:
    """Random-coding block error probability at any message count.

    Each trial draws one transmitted codeword and channel realisation and
    contributes its exact conditional error probability; the reported
    half-width is ``1.96`` standard errors of the trial average.
    """
    if trials < 2:
        raise DomainError("need at least two trials")
    B = channel.B_x
    M = message_count(R, L, B) if M is None else float(M)
    log_m1 = None if np.isfinite(M) else R * L * B
    vals = np.empty(trials)
    for s in range(0, trials, chunk):
        n = min(chunk, trials - s)
        x = complex_normal(rng, (n * L, B), channel.P)
        y, v = channel.respond(x, rng)
        metric = metric_provider(y, v)
        r = metric.g - np.einsum("nkb,nb->nk", metric.f, x)
        d = np.sum(r.real**2 + r.imag**2, axis=-1).reshape(n, L).sum(axis=1)
        a2, var, const = _quadratic_terms(metric, channel.P)
        a2 = a2.reshape(n, -1)
        var = var.reshape(n, -1)
        const = const.reshape(n, L).sum(axis=1)
        log_p = log_lower_tail(a2, var, d, const)
        vals[s : s + n] = np.exp(_log_block_error(log_p, M, log_m1))
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / np.sqrt(trials))
    return ErrorRateResult(mean, _Z95 * se, M, L, trials, "ensemble", se)
