"""Restricted decoder families and their optimal GMIs.

Five families are covered: scalar scaling (``cssf``), matrix scaling
(``cmsf``), their CSI-dependent counterparts (``csi_ssf``, ``csi_msf``) and
linear processing (``lin``). Every result carries its GMI estimate and a
metric provider mapping ``(y, v)`` to :class:`MetricFactors`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Hashable

import numpy as np

from .core import GmiEstimate, MetricFactors, PosteriorStats, hermitian_eigh
from .errors import DomainError, NumericalError
from .expectation import mean_and_stderr

VARIANTS = ("cssf", "cmsf", "csi_ssf", "csi_msf", "lin")
DEGENERATE_RTOL = 1e-12
PINV_RCOND = 1e-12

StatsSampler = Callable[[np.random.Generator, int], PosteriorStats]
PosteriorFn = Callable[[np.ndarray, "np.ndarray | None"], PosteriorStats]
Correlations = Callable[[Hashable], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class RestrictedVariantResult:
    variant: str
    gmi: GmiEstimate
    metric_provider: Callable[..., MetricFactors]
    details: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise DomainError(f"unknown variant {self.variant!r}")
        if self.gmi.value < 0:
            raise DomainError("restricted GMI must be nonnegative")


def _no_posterior(*_args, **_kw):
    raise DomainError("metric provider needs a posterior function; pass posterior=...")


# ---------------------------------------------------------------------------
# scalar scaling


def _scalar_design(T: float, P: float):
    """(gmi, alpha, g-gain) for average conditional variance ``T``."""
    if not T > 0:
        raise NumericalError(f"average conditional variance must be positive, got {T}")
    if T >= P - DEGENERATE_RTOL * P:
        return 0.0, 0.0, 0.0
    return float(np.log(P / T)), float(np.sqrt((P - T) / (P * T))), float(np.sqrt(P / (T * (P - T))))


def _scalar_metric(alpha: float, gain: float, mu: np.ndarray) -> MetricFactors:
    B = mu.shape[-1]
    f = np.broadcast_to(alpha * np.eye(B, dtype=complex), mu.shape + (B,))
    return MetricFactors(gain * mu, f)


def cssf_from_stats(stats: PosteriorStats, P: float, posterior: PosteriorFn | None = None) -> RestrictedVariantResult:
    stats = stats.as_batch().validate()
    per = np.trace(stats.sigma, axis1=-2, axis2=-1).real / stats.B_x
    T, se_T = mean_and_stderr(per)
    value, alpha, gain = _scalar_design(T, P)
    se = se_T / T if value > 0 else 0.0
    post = posterior or _no_posterior

    def metric(y, v=None) -> MetricFactors:
        return _scalar_metric(alpha, gain, post(y, v).mu)

    est = GmiEstimate(value, se, len(stats), "mc")
    return RestrictedVariantResult("cssf", est, metric, {"T": T, "alpha": alpha})


def cssf(
    stats_sampler: StatsSampler,
    P: float,
    n_samples: int,
    rng: np.random.Generator,
    posterior: PosteriorFn | None = None,
) -> RestrictedVariantResult:
    """Constant scalar scaling: GMI ``log(P / T)`` with ``T = tr E[Sigma] / B_x``."""
    _check_n(n_samples)
    return cssf_from_stats(stats_sampler(rng, n_samples), P, posterior)


# ---------------------------------------------------------------------------
# matrix scaling


@dataclass(frozen=True)
class _MatrixDesign:
    value: float
    eigvals: np.ndarray
    wh: np.ndarray  # kept rows of W^H
    f: np.ndarray
    g_gain: np.ndarray  # maps mu to g

    def metric(self, mu: np.ndarray) -> MetricFactors:
        g = np.einsum("ij,...j->...i", self.g_gain, mu)
        return MetricFactors(g, np.broadcast_to(self.f, g.shape + (self.f.shape[-1],)))


def _matrix_design(sigma_bar: np.ndarray, P: float) -> _MatrixDesign:
    lam, w = hermitian_eigh(sigma_bar)
    if np.any(lam <= 0):
        raise NumericalError("averaged covariance is singular")
    keep = lam < P - DEGENERATE_RTOL * P
    B = lam.size
    lk = lam[keep]
    wh = np.conj(w.T)[keep]
    value = float(np.sum(np.log(P / lk)) / B)
    f = np.sqrt((P - lk) / (P * lk))[:, None] * wh
    g_gain = np.sqrt(P / ((P - lk) * lk))[:, None] * wh
    return _MatrixDesign(value, lam, wh, f, g_gain)


def cmsf_from_stats(stats: PosteriorStats, P: float, posterior: PosteriorFn | None = None) -> RestrictedVariantResult:
    stats = stats.as_batch().validate()
    sigma_bar = np.mean(stats.sigma, axis=0)
    design = _matrix_design(sigma_bar, P)
    # delta method: the GMI depends on E[Sigma] through -log det on the kept subspace
    lk = design.eigvals[design.eigvals < P - DEGENERATE_RTOL * P]
    infl = -np.real(np.einsum("ki,nij,kj->n", np.conj(design.wh), stats.sigma, design.wh / lk[:, None]))
    se = mean_and_stderr(infl / stats.B_x)[1] if lk.size else 0.0
    post = posterior or _no_posterior

    def metric(y, v=None) -> MetricFactors:
        return design.metric(post(y, v).mu)

    est = GmiEstimate(max(design.value, 0.0), se, len(stats), "mc")
    return RestrictedVariantResult("cmsf", est, metric, {"sigma_bar": sigma_bar, "eigvals": design.eigvals})


def cmsf(
    stats_sampler: StatsSampler,
    P: float,
    n_samples: int,
    rng: np.random.Generator,
    posterior: PosteriorFn | None = None,
) -> RestrictedVariantResult:
    """Constant matrix scaling built on the spectrum of ``E[Sigma]``."""
    _check_n(n_samples)
    return cmsf_from_stats(stats_sampler(rng, n_samples), P, posterior)


# ---------------------------------------------------------------------------
# CSI-dependent scaling


def _check_n(n: int) -> None:
    if n < 100:
        raise DomainError("n_samples must be at least 100")


def _nested_split(n_samples: int) -> tuple[int, int]:
    k = int(np.ceil(np.sqrt(n_samples)))
    return k, k


def _per_state_stats(channel, v, rng, n_inner) -> PosteriorStats:
    d = channel.sample_given_state(v, rng, n_inner)
    return channel.posterior(d.y, d.v).as_batch().validate()


def _csi_common(channel, P, n_samples, rng, design_fn, variant):
    if channel.state_degenerate:
        # a single state: the nested estimator collapses onto the CSI-free one
        stats = channel.posterior(*_draw_yv(channel, rng, n_samples))
        base = cssf_from_stats(stats, P, channel.posterior) if variant == "csi_ssf" else cmsf_from_stats(
            stats, P, channel.posterior
        )
        return RestrictedVariantResult(variant, base.gmi, base.metric_provider, base.details)
    n_outer, n_inner = _nested_split(n_samples)
    if n_inner < 100:
        raise DomainError("inner sample count must be at least 100")
    states = channel.sample_states(rng, n_outer)
    cache: dict = {}
    values = np.empty(n_outer)
    for k, v in enumerate(states):
        key = _key(v)
        if key not in cache:
            cache[key] = design_fn(_per_state_stats(channel, v, rng, n_inner))
        values[k] = cache[key][0]
    mean, se = mean_and_stderr(values)
    spare = np.random.default_rng(rng.integers(2**63))

    def lookup(v):
        key = _key(v)
        if key not in cache:
            cache[key] = design_fn(_per_state_stats(channel, v, spare, n_inner))
        return cache[key][1]

    def metric(y, v) -> MetricFactors:
        y = np.atleast_2d(y)
        v_arr = np.broadcast_to(np.asarray(v), (y.shape[0],))
        mu = channel.posterior(y, v_arr).mu
        parts = [lookup(vk)(mu[k]) for k, vk in enumerate(v_arr)]
        rows = max(p.rows for p in parts)
        parts = [p.padded(rows) for p in parts]
        return MetricFactors(np.stack([p.g for p in parts]), np.stack([p.f for p in parts]))

    est = GmiEstimate(max(mean, 0.0), se, n_outer * n_inner, "mc")
    return RestrictedVariantResult(variant, est, metric, {"n_outer": n_outer, "n_inner": n_inner})


def _key(v):
    a = np.asarray(v)
    return a.item() if a.ndim == 0 else a.tobytes()


def _draw_yv(channel, rng, n):
    d = channel.sample(rng, n)
    return d.y, d.v


def csi_ssf(channel, P: float, n_samples: int, rng: np.random.Generator) -> RestrictedVariantResult:
    """CSI-dependent scalar scaling: ``E_V[log(P / T(V))]`` by nested Monte Carlo."""
    _check_n(n_samples)

    def design(stats: PosteriorStats):
        T = float(np.mean(np.trace(stats.sigma, axis1=-2, axis2=-1).real) / stats.B_x)
        value, alpha, gain = _scalar_design(T, P)
        return value, lambda mu: _scalar_metric(alpha, gain, mu)

    return _csi_common(channel, P, n_samples, rng, design, "csi_ssf")


def csi_msf(channel, P: float, n_samples: int, rng: np.random.Generator) -> RestrictedVariantResult:
    """CSI-dependent matrix scaling built on the spectrum of ``E[Sigma | v]``."""
    _check_n(n_samples)

    def design(stats: PosteriorStats):
        d = _matrix_design(np.mean(stats.sigma, axis=0), P)
        return d.value, d.metric

    return _csi_common(channel, P, n_samples, rng, design, "csi_msf")


# ---------------------------------------------------------------------------
# linear processing


@dataclass(frozen=True)
class LinearDesign:
    value: float
    q: np.ndarray
    gamma: np.ndarray
    pi: np.ndarray


def linear_design(rxy: np.ndarray, ryy: np.ndarray, P: float) -> LinearDesign:
    """Optimal linear processing ``Gamma`` and scaling ``Pi`` for one CSI value."""
    rxy = np.atleast_2d(np.asarray(rxy, dtype=complex))
    ryy = np.atleast_2d(np.asarray(ryy, dtype=complex))
    ryy = 0.5 * (ryy + ryy.conj().T)
    ryy_pinv = np.linalg.pinv(ryy, rcond=PINV_RCOND, hermitian=True)
    Q = rxy @ ryy_pinv @ rxy.conj().T
    q, w = np.linalg.eigh(0.5 * (Q + Q.conj().T))
    q, w = q[::-1], w[:, ::-1]
    if q[0] >= P - DEGENERATE_RTOL * P:
        raise NumericalError(f"largest eigenvalue of Q ({q[0]:.6g}) reaches P = {P:.6g}")
    keep = q > PINV_RCOND * max(P, 1e-300)
    B = q.size
    qk = q[keep]
    wh = np.conj(w.T)[keep]
    value = float(np.sum(np.log(P / (P - qk))) / B)
    pi = np.sqrt(qk / (P * (P - qk)))[:, None] * wh
    gamma = np.sqrt(P / (qk * (P - qk)))[:, None] * (wh @ rxy @ ryy_pinv)
    return LinearDesign(value, q, gamma, pi)


def _linear_metric(design_for):
    def metric(y, v=None) -> MetricFactors:
        y = np.atleast_2d(np.asarray(y, dtype=complex))
        if v is None:
            d = design_for(None)
            g = y @ d.gamma.T
            return MetricFactors(g, np.broadcast_to(d.pi, g.shape + (d.pi.shape[-1],)))
        v_arr = np.broadcast_to(np.asarray(v), (y.shape[0],))
        parts = []
        for k, vk in enumerate(v_arr):
            d = design_for(vk)
            parts.append(MetricFactors(d.gamma @ y[k], d.pi))
        rows = max(p.rows for p in parts)
        parts = [p.padded(rows) for p in parts]
        return MetricFactors(np.stack([p.g for p in parts]), np.stack([p.f for p in parts]))

    return metric


def linear_variant(
    correlations: Correlations,
    P: float,
    states=None,
) -> RestrictedVariantResult:
    """Linear-processing GMI from the conditional correlations ``v -> (E[X Y^H|v], E[Y Y^H|v])``.

    ``states`` lists sampled CSI values; ``None`` means a CSI-free channel and
    the correlations are queried once with ``v = None``.
    """
    cache: dict = {}

    def design_for(v):
        key = None if v is None else _key(v)
        if key not in cache:
            cache[key] = linear_design(*correlations(v), P)
        return cache[key]

    if states is None:
        d = design_for(None)
        est = GmiEstimate(max(d.value, 0.0), 0.0, 1, "closed")
        return RestrictedVariantResult("lin", est, _linear_metric(design_for), {"Q_eigvals": d.q})
    vals = np.array([design_for(v).value for v in states])
    mean, se = mean_and_stderr(vals)
    est = GmiEstimate(max(mean, 0.0), se, vals.size, "mc")
    return RestrictedVariantResult("lin", est, _linear_metric(design_for))


def linear_variant_sampled(
    x: np.ndarray, y: np.ndarray, P: float, h: float = 1e-6
) -> RestrictedVariantResult:
    """Linear variant fed sample correlations of a CSI-free channel.

    The standard error is propagated by the delta method using a central
    finite-difference gradient of the GMI with respect to the correlation
    entries.
    """
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    n = x.shape[0]
    if n < 100:
        raise DomainError("n_samples must be at least 100")
    rxy = x.T @ np.conj(y) / n
    ryy = y.T @ np.conj(y) / n
    ryy = 0.5 * (ryy + ryy.conj().T)
    d = linear_design(rxy, ryy, P)

    def value_at(a, b):
        return linear_design(a, b, P).value

    g_xy = _complex_gradient(lambda m: value_at(m, ryy), rxy, h)
    g_yy = _complex_gradient(lambda m: value_at(rxy, m), ryy, h)
    infl = np.real(np.einsum("ij,ni,nj->n", np.conj(g_xy), x, np.conj(y)))
    infl += np.real(np.einsum("ij,ni,nj->n", np.conj(g_yy), y, np.conj(y)))
    se = float(np.std(infl, ddof=1) / np.sqrt(n))
    est = GmiEstimate(max(d.value, 0.0), se, n, "mc")
    return RestrictedVariantResult(
        "lin", est, _linear_metric(lambda v: d), {"Rxy": rxy, "Ryy": ryy, "Q_eigvals": d.q}
    )


def _complex_gradient(fn, m: np.ndarray, h: float) -> np.ndarray:
    """``G`` with ``dfn = Re(sum conj(G) dM)`` by central differences."""
    grad = np.zeros(m.shape, dtype=complex)
    scale = h * max(1.0, float(np.max(np.abs(m))))
    for idx in np.ndindex(m.shape):
        for unit in (1.0, 1j):
            e = np.zeros(m.shape, dtype=complex)
            e[idx] = unit * scale
            deriv = (fn(m + e) - fn(m - e)) / (2 * scale)
            grad[idx] += unit * deriv
    return grad


# ---------------------------------------------------------------------------
# ordering


@dataclass(frozen=True)
class OrderingItem:
    name: str
    larger: float
    smaller: float
    slack: float
    passed: bool


@dataclass(frozen=True)
class OrderingReport:
    items: tuple[OrderingItem, ...]

    @property
    def passed(self) -> bool:
        return all(it.passed for it in self.items)

    def __str__(self) -> str:
        lines = [
            f"{'PASS' if it.passed else 'FAIL'} {it.name}: {it.larger:.6g} >= {it.smaller:.6g} (slack {it.slack:.3g})"
            for it in self.items
        ]
        return "\n".join(lines)


def ordering_check(results: dict[str, GmiEstimate], opt: GmiEstimate, n_sigma: float = 3.0) -> OrderingReport:
    """Check the five inequalities between the optimal and restricted GMIs.

    ``results`` maps variant names to estimates; every variant in
    :data:`VARIANTS` is required.
    """
    missing = [v for v in VARIANTS if v not in results]
    if missing:
        raise DomainError(f"missing variants: {missing}")
    r = dict(results)
    r["opt"] = opt

    def item(name, big, small) -> OrderingItem:
        a = max(r[b].value for b in big)
        sa = max((r[b] for b in big), key=lambda e: e.value).std_err
        b = r[small].value
        slack = n_sigma * float(np.hypot(sa, r[small].std_err))
        return OrderingItem(name, a, b, slack, a - b >= -slack)

    items = (
        item("opt >= csi_msf", ["opt"], "csi_msf"),
        item("csi_msf >= csi_ssf", ["csi_msf"], "csi_ssf"),
        item("csi_msf >= cmsf", ["csi_msf"], "cmsf"),
        item("max(csi_ssf, cmsf) >= cssf", ["csi_ssf", "cmsf"], "cssf"),
        item("csi_msf >= lin", ["csi_msf"], "lin"),
    )
    return OrderingReport(items)
