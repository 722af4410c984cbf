"""Compiled vs pure-Python chain kernel on identical pre-drawn randomness.

Usage: python benchmarks/bench_mcmc_kernel.py [--iters N] [--repeat R]
"""

from __future__ import annotations

import argparse
import time
from dataclasses import replace

import numpy as np

from vecgnndr.channels import PhaseNoiseParams
from vecgnndr.mcmc import McmcConfig, run_single_chain
from vecgnndr.mcmc._backend import BACKEND


def _time(backend: str, y, params, config, repeat: int) -> tuple[float, np.ndarray]:
    best = np.inf
    out = None
    cfg = replace(config, backend=backend)
    for _ in range(repeat):
        rng = np.random.default_rng(1234)
        t0 = time.perf_counter()
        out = run_single_chain(y, params, cfg, rng)
        best = min(best, time.perf_counter() - t0)
    return best, out[0]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--iters", type=int, default=10_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--blocks", default="1,2,5")
    args = ap.parse_args()
    if BACKEND != "cython":
        print("compiled kernel unavailable; only the Python timing is meaningful")
    print(f"{'B_x':>4} {'python [s]':>11} {'cython [s]':>11} {'speedup':>8} {'max |dx|':>10}")
    for B in (int(b) for b in args.blocks.split(",")):
        params = PhaseNoiseParams(B, 1.0, 1.0, 0.5)
        y = np.random.default_rng(B).standard_normal(B) + 1j * np.random.default_rng(B + 7).standard_normal(B)
        config = McmcConfig(n_iters=args.iters, burn_in=args.iters // 5, check_acceptance=False)
        t_py, x_py = _time("python", y, params, config, args.repeat)
        if BACKEND == "cython":
            t_cy, x_cy = _time("cython", y, params, config, args.repeat)
            diff = float(np.max(np.abs(x_py - x_cy)))
            print(f"{B:>4} {t_py:>11.4f} {t_cy:>11.4f} {t_py / t_cy:>8.1f} {diff:>10.1e}")
        else:
            print(f"{B:>4} {t_py:>11.4f} {'n/a':>11} {'n/a':>8} {'n/a':>10}")


if __name__ == "__main__":
    main()
