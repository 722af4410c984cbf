"""Domain types, the rate function psi, truncation and Hermitian spectral helpers.

All array-valued types accept an optional leading batch dimension so that
Monte Carlo loops can stay vectorised: a ``PosteriorStats`` holding ``n``
observations stores ``mu`` with shape ``(n, B_x)`` and ``sigma`` with shape
``(n, B_x, B_x)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConvergenceError, DomainError

DEFAULT_EPS = 1e-6
HERMITIAN_RTOL = 1e-12
PSD_RTOL = 1e-10
CLAMP_RTOL = 1e-14
DELTA_RESIDUAL_TOL = 1e-12


def _hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


@dataclass(frozen=True)
class PosteriorStats:
    """Conditional mean ``mu`` and conditional covariance ``sigma`` of the input."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=np.complex128)
        sigma = np.asarray(self.sigma, dtype=np.complex128)
        if sigma.ndim < 2 or sigma.shape[-1] != sigma.shape[-2]:
            raise DomainError(f"sigma must be square, got shape {sigma.shape}")
        if mu.shape != sigma.shape[:-1]:
            raise DomainError(f"mu shape {mu.shape} does not match sigma shape {sigma.shape}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def B_x(self) -> int:
        return self.mu.shape[-1]

    @property
    def batched(self) -> bool:
        return self.mu.ndim == 2

    def __len__(self) -> int:
        if not self.batched:
            raise TypeError("unbatched PosteriorStats has no length")
        return self.mu.shape[0]

    def __getitem__(self, idx) -> "PosteriorStats":
        return PosteriorStats(self.mu[idx], self.sigma[idx])

    def as_batch(self) -> "PosteriorStats":
        if self.batched:
            return self
        return PosteriorStats(self.mu[None, :], self.sigma[None, :, :])

    def validate(self) -> "PosteriorStats":
        """Check Hermitian symmetry and numerical PSD; return self."""
        check_hermitian_psd(self.sigma)
        if not (np.all(np.isfinite(self.mu.view(float))) and np.all(np.isfinite(self.sigma.view(float)))):
            raise DomainError("posterior statistics contain non-finite entries")
        return self

    @staticmethod
    def concat(parts: list["PosteriorStats"]) -> "PosteriorStats":
        parts = [p.as_batch() for p in parts]
        return PosteriorStats(
            np.concatenate([p.mu for p in parts]), np.concatenate([p.sigma for p in parts])
        )


@dataclass(frozen=True)
class TruncatedSpectrum:
    """Descending spectrum of a conditional covariance and its eps-truncation.

    ``gaps`` holds ``P - trunc_eigvals`` computed without cancellation, which
    matters when ``delta_eps`` is tiny.
    """

    eigvals: np.ndarray
    eigvecs: np.ndarray
    trunc_eigvals: np.ndarray
    delta_eps: np.ndarray | float
    gaps: np.ndarray


@dataclass(frozen=True)
class MetricFactors:
    """Processing vector ``g`` and scaling matrix ``f`` of the decoding metric.

    ``f`` may have fewer rows than columns (directions carrying no rate are
    dropped); :meth:`padded` appends zero rows, which leaves the metric
    unchanged.
    """

    g: np.ndarray
    f: np.ndarray

    def __post_init__(self) -> None:
        g = np.asarray(self.g, dtype=np.complex128)
        f = np.asarray(self.f, dtype=np.complex128)
        if f.ndim < 2 or g.shape != f.shape[:-1]:
            raise DomainError(f"g shape {g.shape} incompatible with f shape {f.shape}")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "f", f)

    @property
    def rows(self) -> int:
        return self.f.shape[-2]

    def padded(self, rows: int) -> "MetricFactors":
        extra = rows - self.rows
        if extra < 0:
            raise DomainError("cannot pad to fewer rows")
        if extra == 0:
            return self
        g_pad = np.zeros(self.g.shape[:-1] + (extra,), dtype=np.complex128)
        f_pad = np.zeros(self.f.shape[:-2] + (extra, self.f.shape[-1]), dtype=np.complex128)
        return MetricFactors(np.concatenate([self.g, g_pad], axis=-1), np.concatenate([self.f, f_pad], axis=-2))

    def scaled(self, c: float) -> "MetricFactors":
        return MetricFactors(c * self.g, c * self.f)

    def distance(self, x: np.ndarray) -> np.ndarray:
        """``||g - f x||^2`` with broadcasting over leading dimensions."""
        r = self.g - np.einsum("...ij,...j->...i", self.f, x)
        return np.sum(r.real**2 + r.imag**2, axis=-1)


@dataclass(frozen=True)
class GmiEstimate:
    """GMI value in nats per input symbol.

    ``method`` is one of ``closed``, ``quadrature``, ``mc`` or ``mcmc``; only
    the last two carry a nonzero standard error.
    """

    value: float
    std_err: float
    n_samples: int
    method: str = "mc"
    flags: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not np.isfinite(self.value):
            raise DomainError("GMI value must be finite")
        if self.std_err < 0:
            raise DomainError("std_err must be nonnegative")
        if self.n_samples < 1:
            raise DomainError("n_samples must be at least 1")

    @property
    def is_closed_form(self) -> bool:
        return self.method in ("closed", "quadrature")


def check_hermitian_psd(sigma: np.ndarray) -> None:
    """Raise DomainError unless ``sigma`` (possibly batched) is Hermitian PSD."""
    sigma = np.asarray(sigma)
    asym = np.max(np.abs(sigma - np.conj(np.swapaxes(sigma, -1, -2))), axis=(-1, -2))
    scale = np.maximum(np.max(np.abs(sigma), axis=(-1, -2)), np.finfo(float).tiny)
    if np.any(asym > HERMITIAN_RTOL * scale):
        raise DomainError("matrix is not Hermitian within tolerance")
    w = np.linalg.eigvalsh(_hermitian_part(sigma))
    tr = np.trace(sigma, axis1=-2, axis2=-1).real
    if np.any(w.min(axis=-1) < -PSD_RTOL * np.abs(tr)):
        raise DomainError("matrix is not positive semidefinite within tolerance")


def psi(q, P: float):
    """Per-direction rate ``log(P/q) - 1 + q/P`` for ``q < P`` and 0 otherwise."""
    if not P > 0:
        raise DomainError(f"P must be positive, got {P}")
    q_arr = np.asarray(q, dtype=float)
    if np.any(~(q_arr > 0)):
        raise DomainError("psi requires q > 0")
    r = np.minimum(q_arr / P - 1.0, 0.0)
    out = r - np.log1p(r)
    return float(out) if out.ndim == 0 else out


def _delta_objective(delta, lam, P, eps):
    return np.log1p(P * delta) - delta * lam + eps


def _solve_delta_batch(lam: np.ndarray, P: float, eps: float) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    out = np.zeros_like(lam)
    active = lam >= P
    if not np.any(active):
        return out
    la = lam[active]
    lo = np.zeros_like(la)
    hi = np.maximum(1.0, 2.0 * eps * (la - P + 1.0) / P)
    for _ in range(200):
        pos = _delta_objective(hi, la, P, eps) > 0
        if not np.any(pos):
            break
        lo = np.where(pos, hi, lo)
        hi = np.where(pos, 2.0 * hi, hi)
    else:
        raise ConvergenceError("could not bracket the truncation offset")
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        done = (mid <= lo) | (mid >= hi)
        if np.all(done):
            break
        pos = _delta_objective(mid, la, P, eps) > 0
        lo = np.where(pos & ~done, mid, lo)
        hi = np.where(~pos & ~done, mid, hi)
    r_lo = np.abs(_delta_objective(lo, la, P, eps))
    r_hi = np.abs(_delta_objective(hi, la, P, eps))
    root = np.where(r_lo <= r_hi, lo, hi)
    resid = np.minimum(r_lo, r_hi)
    if np.any(resid > DELTA_RESIDUAL_TOL):
        raise ConvergenceError(f"truncation offset residual {resid.max():.3g} exceeds tolerance")
    out[active] = root
    return out


def solve_delta_eps(lambda1, P: float, eps: float = DEFAULT_EPS):
    """Truncation offset: the root of ``log(1 + P d) - d lambda1 = -eps`` (0 if lambda1 < P)."""
    if not (P > 0 and eps > 0):
        raise DomainError("P and eps must be positive")
    lam = np.asarray(lambda1, dtype=float)
    if np.any(~(lam > 0)):
        raise DomainError("lambda1 must be positive")
    out = _solve_delta_batch(np.atleast_1d(lam), P, eps)
    return float(out[0]) if lam.ndim == 0 else out.reshape(lam.shape)


def hermitian_eigh(sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Descending eigendecomposition of a Hermitian PSD matrix (batched).

    Eigenvalues in ``[-1e-10 tr, 0]`` are clamped to ``1e-14 tr``; anything
    more negative is rejected.
    """
    sigma = _hermitian_part(np.asarray(sigma, dtype=np.complex128))
    w, v = np.linalg.eigh(sigma)
    w = w[..., ::-1]
    v = v[..., :, ::-1]
    tr = np.abs(np.trace(sigma, axis1=-2, axis2=-1).real)[..., None]
    if np.any(w < -PSD_RTOL * tr):
        raise DomainError("covariance has a significantly negative eigenvalue")
    w = np.where(w <= 0, CLAMP_RTOL * tr, w)
    return w, v


def truncate_spectrum(sigma: np.ndarray, P: float, eps: float = DEFAULT_EPS) -> TruncatedSpectrum:
    """Eigendecomposition plus the eps-truncated eigenvalues ``P/(1 + P delta)``."""
    if not (P > 0 and eps > 0):
        raise DomainError("P and eps must be positive")
    w, v = hermitian_eigh(sigma)
    delta = _solve_delta_batch(np.atleast_1d(w[..., 0]).ravel(), P, eps).reshape(w.shape[:-1])
    d = np.asarray(delta)[..., None]
    above = w >= P
    trunc = np.where(above, P / (1.0 + P * d), w)
    gaps = np.where(above, P * (P * d) / (1.0 + P * d), P - w)
    delta_out = float(delta) if np.ndim(delta) == 0 else delta
    return TruncatedSpectrum(eigvals=w, eigvecs=v, trunc_eigvals=trunc, delta_eps=delta_out, gaps=gaps)


def matrix_function(sigma: np.ndarray, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its spectrum."""
    w, v = np.linalg.eigh(_hermitian_part(np.asarray(sigma, dtype=np.complex128)))
    return np.einsum("...ij,...j,...kj->...ik", v, fn(w), np.conj(v))


def inv_sqrtm(sigma: np.ndarray) -> np.ndarray:
    """``sigma^{-1/2}`` for a Hermitian positive definite matrix."""
    w = np.linalg.eigvalsh(_hermitian_part(np.asarray(sigma, dtype=np.complex128)))
    if np.any(w <= 0):
        raise DomainError("matrix is not positive definite")
    return matrix_function(sigma, lambda x: 1.0 / np.sqrt(x))


def sqrtm_psd(sigma: np.ndarray) -> np.ndarray:
    return matrix_function(sigma, lambda x: np.sqrt(np.maximum(x, 0.0)))


@dataclass(frozen=True)
class JointDraws:
    """A batch of channel draws: inputs ``x`` (n, B_x), outputs ``y`` (n, B_y), CSI ``v`` (or None)."""

    x: np.ndarray
    y: np.ndarray
    v: np.ndarray | None = None

    def __len__(self) -> int:
        return self.x.shape[0]
