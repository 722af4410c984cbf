"""Channel models with samplers, posterior statistics and closed-form GMIs."""

from .acgnc import (
    AcgncChannel,
    AcgncParams,
    StateAcgncChannel,
    acgnc_gmi_value,
    acgnc_ml_distance,
    acgnc_optimal,
    acgnc_posterior_stats,
)
from .base import ChannelModel, snr_to_sigma2
from .bnc import (
    ELEMENTWISE_LIMIT,
    BlockNoncoherentChannel,
    BlockNoncoherentParams,
    bnc_elementwise_gmi,
    bnc_elementwise_limit,
    bnc_large_block_limit,
    bnc_lower_bound,
    bnc_metric_provider,
    bnc_optimal_gmi,
    bnc_optimal_metric,
    bnc_posterior_stats,
    bnc_sample,
    bnc_squeeze_halfwidth,
)
from .memoryless import memoryless_gnndr
from .pnc import (
    PhaseNoiseChannel,
    PhaseNoiseParams,
    identity_metric,
    phase_covariance,
    pnc_correlations,
    pnc_identity_A,
    pnc_identity_gmi,
    pnc_identity_limit,
    pnc_identity_objective,
    pnc_identity_theta,
    pnc_linear_gmi,
    pnc_linear_limit,
    pnc_posterior_stats,
    pnc_sample,
    sample_phases,
)

__all__ = [name for name in dir() if not name.startswith("_")]
