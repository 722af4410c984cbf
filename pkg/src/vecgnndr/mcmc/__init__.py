"""Chain sampler for phase-noise posterior statistics and its quadrature oracle."""

from ._backend import BACKEND, get_kernel
from .quadrature import quadrature_posterior
from .sampler import (
    McmcConfig,
    McmcDiagnostics,
    McmcPhaseNoiseChannel,
    mcmc_posterior,
    mcmc_posterior_batch,
    run_single_chain,
)

__all__ = [
    "BACKEND",
    "McmcConfig",
    "McmcDiagnostics",
    "McmcPhaseNoiseChannel",
    "get_kernel",
    "mcmc_posterior",
    "mcmc_posterior_batch",
    "quadrature_posterior",
    "run_single_chain",
]
