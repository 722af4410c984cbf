"""SNR sweeps over decoder variants for the three reference channels."""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace

import numpy as np

from .channels import (
    AcgncChannel,
    AcgncParams,
    BlockNoncoherentChannel,
    BlockNoncoherentParams,
    PhaseNoiseChannel,
    PhaseNoiseParams,
    acgnc_optimal,
    bnc_elementwise_gmi,
    bnc_optimal_gmi,
    pnc_correlations,
    pnc_identity_gmi,
    snr_to_sigma2,
)
from .core import GmiEstimate, hermitian_eigh
from .errors import DomainError
from .expectation import derive_stream, parallel_map
from .gmi import optimal_gmi_from_stats
from .mcmc import McmcConfig, McmcPhaseNoiseChannel
from .restricted import cmsf_from_stats, cssf_from_stats, linear_variant

CHANNEL_VARIANTS = {
    "bnc": ("opt", "elem", "cssf", "cmsf", "csi_ssf", "csi_msf", "lin"),
    "pnc": ("opt", "cssf", "cmsf", "csi_ssf", "csi_msf", "lin", "id"),
    "acgnc": ("opt", "cssf", "cmsf", "csi_ssf", "csi_msf", "lin"),
}
CSV_HEADER = "snr_db,variant,gmi_nats,std_err,n_samples,method"
_STATS_VARIANTS = {"opt", "cssf", "cmsf", "csi_ssf", "csi_msf"}


@dataclass(frozen=True)
class SweepSpec:
    channel: str
    B_x: int
    snr_start: float
    snr_stop: float
    snr_step: float
    variants: tuple[str, ...]
    n_samples: int = 100_000
    seed: int = 0
    P: float = 1.0
    c: float = 0.1
    rho: float = 0.5
    posterior: str = "analytic"
    mcmc: McmcConfig = field(default_factory=McmcConfig)

    def __post_init__(self) -> None:
        if self.channel not in CHANNEL_VARIANTS:
            raise DomainError(f"unknown channel {self.channel!r}; choose from {sorted(CHANNEL_VARIANTS)}")
        if not self.variants:
            raise DomainError("the variant list is empty; pass at least one of " + ",".join(CHANNEL_VARIANTS[self.channel]))
        allowed = CHANNEL_VARIANTS[self.channel]
        bad = [v for v in self.variants if v not in allowed]
        if bad:
            hint = {"elem": " (elem is defined for bnc only)", "id": " (id is defined for pnc only)"}
            extra = "".join(hint.get(b, "") for b in bad)
            raise DomainError(f"variants {bad} are not available for channel {self.channel}{extra}; allowed: {','.join(allowed)}")
        if len(set(self.variants)) != len(self.variants):
            raise DomainError("duplicate variants")
        if not self.snr_step > 0:
            raise DomainError("snr step must be positive")
        if self.snr_stop < self.snr_start:
            raise DomainError("snr stop must not be below snr start")
        if self.B_x < 1:
            raise DomainError("block size must be positive")
        if self.n_samples < 100:
            raise DomainError("n_samples must be at least 100")
        if self.posterior not in ("analytic", "mcmc"):
            raise DomainError("posterior must be analytic or mcmc")
        if self.posterior == "mcmc" and self.channel != "pnc":
            raise DomainError("the mcmc posterior is only available for pnc")

    @property
    def snr_grid(self) -> np.ndarray:
        n = int(np.floor((self.snr_stop - self.snr_start) / self.snr_step + 1e-9)) + 1
        return self.snr_start + self.snr_step * np.arange(n)


@dataclass(frozen=True)
class SweepRow:
    snr_db: float
    variant: str
    gmi: GmiEstimate


def _acgnc_params(spec: SweepSpec, sigma2: float) -> AcgncParams:
    i = np.arange(spec.B_x)
    S = sigma2 * spec.rho ** np.abs(np.subtract.outer(i, i))
    return AcgncParams(np.eye(spec.B_x), S, spec.P)


def _constant_cov_variants(sigma: np.ndarray, P: float) -> dict[str, GmiEstimate]:
    lam = hermitian_eigh(sigma)[0]
    B = lam.size
    T = float(np.mean(lam))
    cs = float(np.log(P / T)) if T < P else 0.0
    cm = float(np.sum(np.log(P / lam[lam < P])) / B)
    one = lambda v: GmiEstimate(max(v, 0.0), 0.0, 1, "closed")  # noqa: E731
    return {"cssf": one(cs), "cmsf": one(cm), "csi_ssf": one(cs), "csi_msf": one(cm)}


def evaluate_point(spec: SweepSpec, index: int, snr_db: float) -> list[SweepRow]:
    """All requested variants at one SNR; randomness comes from ``derive_stream(seed, index)``."""
    sigma2 = snr_to_sigma2(snr_db, spec.P)
    out: dict[str, GmiEstimate] = {}
    wanted = set(spec.variants)
    rng = derive_stream(spec.seed, index)
    if spec.channel == "bnc":
        params = BlockNoncoherentParams(spec.B_x, spec.P, sigma2)
        channel = BlockNoncoherentChannel(params)
        if "opt" in wanted:
            out["opt"] = bnc_optimal_gmi(params)
        if "elem" in wanted:
            out["elem"] = bnc_elementwise_gmi(params)
        if "lin" in wanted:
            zero = np.zeros((spec.B_x, spec.B_x))
            ryy = (spec.P + sigma2) * np.eye(spec.B_x)
            out["lin"] = linear_variant(lambda v: (zero, ryy), spec.P).gmi
        need_stats = wanted & {"cssf", "cmsf", "csi_ssf", "csi_msf"}
    elif spec.channel == "pnc":
        params = PhaseNoiseParams(spec.B_x, spec.P, sigma2, spec.c)
        if spec.posterior == "mcmc":
            seed = int(rng.integers(2**62))
            channel = McmcPhaseNoiseChannel(params, replace(spec.mcmc, seed=seed), threads=1)
        else:
            channel = PhaseNoiseChannel(params)
        if "lin" in wanted:
            rxy, ryy = pnc_correlations(params)
            out["lin"] = linear_variant(lambda v: (rxy, ryy), spec.P).gmi
        if "id" in wanted:
            out["id"] = pnc_identity_gmi(params)
        need_stats = wanted & _STATS_VARIANTS
    else:
        params = _acgnc_params(spec, sigma2)
        channel = AcgncChannel(params)
        if "opt" in wanted:
            out["opt"] = acgnc_optimal(params)[0]
        if "lin" in wanted:
            rxy = spec.P * params.A.conj().T
            ryy = spec.P * params.A @ params.A.conj().T + params.Sigma_noise
            out["lin"] = linear_variant(lambda v: (rxy, ryy), spec.P).gmi
        post = channel.posterior(np.zeros((1, params.B_y)))
        for k, v in _constant_cov_variants(post.sigma[0], spec.P).items():
            if k in wanted:
                out[k] = v
        need_stats = set()
    if need_stats:
        draws = channel.sample(rng, spec.n_samples)
        stats = channel.posterior(draws.y, draws.v)
        method = "mcmc" if spec.posterior == "mcmc" else "mc"
        if "opt" in need_stats:
            out["opt"] = optimal_gmi_from_stats(stats, spec.P, method)
        if need_stats & {"cssf", "csi_ssf"}:
            r = cssf_from_stats(stats, spec.P).gmi
            out.setdefault("cssf", _relabel(r, method))
            if "csi_ssf" in need_stats:
                out["csi_ssf"] = _relabel(r, method)
        if need_stats & {"cmsf", "csi_msf"}:
            r = cmsf_from_stats(stats, spec.P).gmi
            out.setdefault("cmsf", _relabel(r, method))
            if "csi_msf" in need_stats:
                out["csi_msf"] = _relabel(r, method)
    return [SweepRow(float(snr_db), v, out[v]) for v in spec.variants]


def _relabel(est: GmiEstimate, method: str) -> GmiEstimate:
    return GmiEstimate(est.value, est.std_err, est.n_samples, method, est.flags)


def run_sweep(spec: SweepSpec, threads: int | None = None) -> list[SweepRow]:
    grid = spec.snr_grid
    parts = parallel_map(lambda k: evaluate_point(spec, k, float(grid[k])), range(grid.size), threads)
    return [row for part in parts for row in part]


def fmt(x: float) -> str:
    return f"{x:.12g}"


def rows_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in rows:
        g = r.gmi
        buf.write(f"{fmt(r.snr_db)},{r.variant},{fmt(g.value)},{fmt(g.std_err)},{g.n_samples},{g.method}\n")
    return buf.getvalue()


def rows_to_gnuplot(rows: list[SweepRow]) -> str:
    """One data block per variant (separated by two blank lines): snr, gmi, std_err."""
    blocks = []
    for v in dict.fromkeys(r.variant for r in rows):
        lines = [f"# {v}"] + [f"{fmt(r.snr_db)} {fmt(r.gmi.value)} {fmt(r.gmi.std_err)}" for r in rows if r.variant == v]
        blocks.append("\n".join(lines))
    return "\n\n\n".join(blocks) + "\n"
