"""Command-line entry point.

Subcommands: ``sweep``, ``mcmc-validate``, ``decode-sim`` and ``codebook-opt``.
Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 validation
tolerance breach.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .channels import (
    AcgncChannel,
    AcgncParams,
    BlockNoncoherentChannel,
    BlockNoncoherentParams,
    PhaseNoiseChannel,
    PhaseNoiseParams,
    acgnc_optimal,
    bnc_metric_provider,
    bnc_optimal_gmi,
    identity_metric,
    snr_to_sigma2,
)
from .codebook import DiagonalCovariance, codebook_objective, optimize_codebook
from .decoder import MAX_MESSAGES, block_error_rate, ensemble_error_rate, message_count
from .errors import AcceptanceRateError, DomainError, NumericalError, ToleranceBreach, VecGnndrError
from .expectation import derive_stream, parallel_map
from .gmi import optimal_gmi, optimal_metric
from .mcmc import McmcConfig, mcmc_posterior, quadrature_posterior
from .sweep import CHANNEL_VARIANTS, SweepSpec, fmt, rows_to_csv, rows_to_gnuplot, run_sweep

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_TOLERANCE = 0, 1, 2, 3
ORACLE_MAX_B = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 by default; usage errors are 1 here
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file of option defaults; flags given on the command line win")
    p.add_argument("--seed", type=int, default=None, help="master seed (required for stochastic runs)")
    p.add_argument("--threads", type=int, default=None, help="worker count (default: $VECGNNDR_THREADS, else 1)")
    p.add_argument("--output", "-o", type=Path, default=None, help="CSV destination (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    fmtc = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="vecgnndr", description="GMI-optimal vectorised nearest-neighbour decoding toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sweep", help="GMI of decoder variants over an SNR grid", formatter_class=fmtc)
    _common(s)
    s.add_argument("--channel", choices=sorted(CHANNEL_VARIANTS), default="bnc")
    s.add_argument("--block-size", "-B", type=int, default=2)
    s.add_argument("--snr-start", type=float, default=-5.0, help="dB")
    s.add_argument("--snr-stop", type=float, default=30.0, help="dB, inclusive")
    s.add_argument("--snr-step", type=float, default=5.0, help="dB")
    s.add_argument("--variants", default="opt", help="comma list from opt,elem,cssf,cmsf,csi_ssf,csi_msf,lin,id")
    s.add_argument("--n-samples", type=int, default=100_000, help="Monte Carlo draws per SNR point")
    s.add_argument("--c", type=float, default=0.1, help="phase-noise increment std (pnc)")
    s.add_argument("--rho", type=float, default=0.5, help="noise correlation coefficient (acgnc)")
    s.add_argument("--posterior", choices=("analytic", "mcmc"), default="analytic", help="posterior source (pnc)")
    s.add_argument("--mcmc-iters", type=int, default=McmcConfig.n_iters)
    s.add_argument("--mcmc-burn-in", type=int, default=McmcConfig.burn_in)
    s.add_argument("--mcmc-chains", type=int, default=McmcConfig.n_chains)
    s.add_argument("--gnuplot", type=Path, default=None, help="also write a gnuplot data file")
    s.set_defaults(func=cmd_sweep)

    m = sub.add_parser("mcmc-validate", help="compare chain estimates with the quadrature oracle", formatter_class=fmtc)
    _common(m)
    m.add_argument("--block-size", "-B", type=int, default=1)
    m.add_argument("--c", type=float, default=0.5)
    m.add_argument("--snr-db", type=float, default=0.0)
    m.add_argument("--n-obs", type=int, default=20)
    m.add_argument("--n-iters", type=int, default=McmcConfig.n_iters)
    m.add_argument("--burn-in", type=int, default=McmcConfig.burn_in)
    m.add_argument("--step", type=float, default=McmcConfig.step, help="initial random-walk step")
    m.add_argument("--chains", type=int, default=McmcConfig.n_chains)
    m.add_argument("--no-adapt", action="store_true", help="keep the step fixed during burn-in")
    m.add_argument("--mu-tol", type=float, default=0.02, help="pooled |dmu| tolerance, in units of sqrt(P)")
    m.add_argument("--sigma-tol", type=float, default=0.05, help="per-entry |dSigma| tolerance, in units of P")
    m.set_defaults(func=cmd_mcmc_validate)

    d = sub.add_parser("decode-sim", help="block error rate of random Gaussian codes", formatter_class=fmtc)
    _common(d)
    d.add_argument("--channel", choices=sorted(CHANNEL_VARIANTS), default="bnc")
    d.add_argument("--block-size", "-B", type=int, default=2)
    d.add_argument("--snr-db", type=float, default=10.0)
    d.add_argument("--c", type=float, default=0.1)
    d.add_argument("--rho", type=float, default=0.5)
    rate = d.add_mutually_exclusive_group()
    rate.add_argument("--rate", type=float, default=None, help="nats per symbol")
    rate.add_argument("--rate-fraction", type=float, default=0.5, help="fraction of the optimal GMI")
    d.add_argument("--L", dest="lengths", type=_ints, default=[10, 50, 200], help="comma list of codeword lengths")
    d.add_argument("--trials", type=int, default=10_000)
    d.add_argument("--metric", choices=("opt", "id"), default="opt")
    d.add_argument("--method", choices=("auto", "explicit", "ensemble"), default="auto",
                   help=f"auto: explicit codebooks when M <= {MAX_MESSAGES}, else the ensemble estimator")
    d.set_defaults(func=cmd_decode_sim)

    k = sub.add_parser("codebook-opt", help="fixed-point design of a diagonal input covariance", formatter_class=fmtc)
    _common(k)
    k.add_argument("--channel", choices=sorted(CHANNEL_VARIANTS), default="acgnc")
    k.add_argument("--block-size", "-B", type=int, default=2)
    k.add_argument("--snr-db", type=float, default=0.0)
    k.add_argument("--c", type=float, default=0.1)
    k.add_argument("--rho", type=float, default=0.0, help="noise correlation coefficient (acgnc)")
    k.add_argument("--gains", type=_floats, default=None, help="acgnc diagonal gains (default: all ones)")
    k.add_argument("--n-samples", type=int, default=20_000)
    k.add_argument("--n-inner", type=int, default=64)
    k.add_argument("--max-iter", type=int, default=30)
    k.add_argument("--tol", type=float, default=1e-3)
    k.add_argument("--damping", type=float, default=0.5)
    k.set_defaults(func=cmd_codebook_opt)
    return parser


# ---------------------------------------------------------------------------


def _require_seed(args) -> int:
    if args.seed is None:
        raise UsageError(f"{args.command} is stochastic; pass --seed")
    return int(args.seed)


def _emit(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_bytes(text.encode("utf-8"))


def cmd_sweep(args) -> int:
    variants = tuple(v.strip() for v in args.variants.split(",") if v.strip())
    sampled = {"bnc": {"cssf", "cmsf", "csi_ssf", "csi_msf"}, "pnc": {"opt", "cssf", "cmsf", "csi_ssf", "csi_msf"}}
    needs_seed = bool(set(variants) & sampled.get(args.channel, set()))
    seed = _require_seed(args) if needs_seed else (args.seed or 0)
    mc = McmcConfig(n_iters=args.mcmc_iters, burn_in=args.mcmc_burn_in, n_chains=args.mcmc_chains)
    spec = SweepSpec(
        channel=args.channel,
        B_x=args.block_size,
        snr_start=args.snr_start,
        snr_stop=args.snr_stop,
        snr_step=args.snr_step,
        variants=variants,
        n_samples=args.n_samples,
        seed=seed,
        c=args.c,
        rho=args.rho,
        posterior=args.posterior,
        mcmc=mc,
    )
    rows = run_sweep(spec, args.threads)
    _emit(rows_to_csv(rows), args.output)
    if args.gnuplot is not None:
        args.gnuplot.write_bytes(rows_to_gnuplot(rows).encode("utf-8"))
    return EXIT_OK


def cmd_mcmc_validate(args) -> int:
    seed = _require_seed(args)
    P = 1.0
    params = PhaseNoiseParams(args.block_size, P, snr_to_sigma2(args.snr_db, P), args.c)
    config = McmcConfig(
        n_iters=args.n_iters, burn_in=args.burn_in, step=args.step, n_chains=args.chains,
        seed=seed, adapt=not args.no_adapt,
    )
    ys = PhaseNoiseChannel(params).sample(derive_stream(seed, 0), args.n_obs).y
    oracle = args.block_size <= ORACLE_MAX_B
    out = sys.stdout
    if not oracle:
        out.write(f"diagnostics-only mode: block size {args.block_size} > {ORACLE_MAX_B}, no oracle comparison\n")

    def one(k):
        st, diag = mcmc_posterior(ys[k], params, config, stream=1 + k)
        ref = quadrature_posterior(ys[k], params) if oracle else None
        return st, diag, ref

    res = parallel_map(one, range(args.n_obs), args.threads)
    rates = np.array([r[1].acceptance_rate for r in res])
    spreads = np.array([r[1].split_spread for r in res])
    if oracle:
        dmu = np.stack([np.abs(r[0].mu - r[2].mu) for r in res])
        dsig = np.stack([np.abs(r[0].sigma - r[2].sigma) for r in res])
        out.write("obs,max_abs_dmu,max_abs_dsigma,acceptance,chain_spread\n")
        for k in range(args.n_obs):
            out.write(f"{k},{fmt(dmu[k].max())},{fmt(dsig[k].max())},{fmt(rates[k])},{fmt(spreads[k])}\n")
        pooled = np.sqrt(np.mean(dmu**2, axis=0))
        out.write("entry,pooled_abs_dmu,max_abs_dmu\n")
        for i in range(args.block_size):
            out.write(f"{i},{fmt(pooled[i])},{fmt(dmu[:, i].max())}\n")
        mu_ok = bool(np.all(pooled <= args.mu_tol * np.sqrt(P)))
        sig_ok = bool(np.all(dsig <= args.sigma_tol * P))
        out.write(f"pooled |dmu| max {fmt(pooled.max())} (tol {fmt(args.mu_tol * np.sqrt(P))}): {'ok' if mu_ok else 'BREACH'}\n")
        out.write(f"|dSigma| max {fmt(dsig.max())} (tol {fmt(args.sigma_tol * P)}): {'ok' if sig_ok else 'BREACH'}\n")
    else:
        mu_ok = sig_ok = True
        out.write("obs,acceptance,chain_spread\n")
        for k in range(args.n_obs):
            out.write(f"{k},{fmt(rates[k])},{fmt(spreads[k])}\n")
    out.write(f"acceptance rate range [{fmt(rates.min())}, {fmt(rates.max())}]\n")
    if not (mu_ok and sig_ok):
        raise ToleranceBreach("chain estimates differ from the oracle beyond tolerance")
    return EXIT_OK


def _channel_setup(args):
    """(channel, optimal metric provider, optimal GMI value)."""
    P = 1.0
    s2 = snr_to_sigma2(args.snr_db, P)
    B = args.block_size
    if args.channel == "bnc":
        p = BlockNoncoherentParams(B, P, s2)
        return BlockNoncoherentChannel(p), bnc_metric_provider(p), lambda: bnc_optimal_gmi(p).value
    if args.channel == "pnc":
        ch = PhaseNoiseChannel(PhaseNoiseParams(B, P, s2, args.c))

        def provider(y, v=None):
            return optimal_metric(ch.posterior(y, v), P)

        def value():
            return optimal_gmi(ch.stats_sampler(), P, 100_000, derive_stream(_require_seed(args), 1)).value

        return ch, provider, value
    i = np.arange(B)
    gains = np.ones(B) if getattr(args, "gains", None) is None else np.asarray(args.gains, dtype=float)
    if gains.shape != (B,):
        raise UsageError("--gains must list one value per block entry")
    p = AcgncParams(np.diag(gains), s2 * args.rho ** np.abs(np.subtract.outer(i, i)), P)
    est, metric = acgnc_optimal(p)
    return AcgncChannel(p), metric, lambda: est.value


def cmd_decode_sim(args) -> int:
    seed = _require_seed(args)
    if args.trials < 2:
        raise UsageError("--trials must be at least 2")
    if not args.lengths or min(args.lengths) < 1:
        raise UsageError("--L needs positive lengths")
    channel, provider, i_opt = _channel_setup(args)
    if args.metric == "id":
        if args.channel != "pnc":
            raise UsageError("the identity metric is defined for pnc only")
        provider = identity_metric
    R = args.rate if args.rate is not None else args.rate_fraction * i_opt()
    if R < 0:
        raise UsageError("rate must be nonnegative")
    lines = ["L,trials,error_rate,ci_half_width,M,method,rate_nats"]
    for j, L in enumerate(args.lengths):
        rng = derive_stream(seed, 100 + j)
        M = message_count(R, L, channel.B_x)
        method = args.method
        if method == "auto":
            method = "explicit" if M <= MAX_MESSAGES else "ensemble"
        if M <= 1:
            res_rate, half, meth = 0.0, 0.0, method
        elif method == "explicit":
            r = block_error_rate(channel, provider, R, L, args.trials, rng)
            res_rate, half, meth = r.error_rate, r.half_width, r.method
        else:
            r = ensemble_error_rate(channel, provider, R, L, args.trials, rng)
            res_rate, half, meth = r.error_rate, r.half_width, r.method
        lines.append(f"{L},{args.trials},{fmt(res_rate)},{fmt(half)},{fmt(M)},{meth},{fmt(R)}")
    _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK


def cmd_codebook_opt(args) -> int:
    seed = _require_seed(args)
    channel, _, _ = _channel_setup(args)
    B = channel.B_x
    cur, hist = optimize_codebook(
        channel,
        DiagonalCovariance.uniform(B),
        n_samples=args.n_samples,
        damping=args.damping,
        tol=args.tol,
        max_iter=args.max_iter,
        n_inner=args.n_inner,
        seed_stream=lambda k: derive_stream(seed, k),
    )
    J_final = codebook_objective(channel, cur, args.n_samples, derive_stream(seed, 10_000))
    objs = list(hist.objective) + [J_final[0]]
    ses = list(hist.objective_se) + [J_final[1]]
    head = ["iteration"] + [f"lambda_{i + 1}" for i in range(B)] + ["trace", "objective", "objective_se"]
    lines = [",".join(head)]
    for it, lam in enumerate(hist.lambdas):
        # objective in nats per channel symbol
        row = [str(it)] + [fmt(x) for x in lam] + [fmt(float(np.sum(lam))), fmt(objs[it]), fmt(ses[it])]
        lines.append(",".join(row))
    _emit("\n".join(lines) + "\n", args.output)
    sys.stderr.write(f"converged: {hist.converged} after {len(hist.lambdas) - 1} iterations\n")
    return EXIT_OK


# ---------------------------------------------------------------------------


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is None:
        return args
    try:
        cfg = json.loads(args.config.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    sub = parser._subparsers._group_actions[0].choices[args.command]  # noqa: SLF001
    known = {a.dest for a in sub._actions}  # noqa: SLF001
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {unknown}")
    sub.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
        return int(args.func(args))
    except SystemExit as exc:
        return int(exc.code or 0)
    except (UsageError, DomainError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (ToleranceBreach, AcceptanceRateError) as exc:
        sys.stderr.write(f"validation failed: {exc}\n")
        return EXIT_TOLERANCE
    except NumericalError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except VecGnndrError as exc:  # BudgetExceeded and other input problems
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
