"""Optimal vectorised generalised nearest-neighbour decoding for channels with in-block memory."""

from .core import (
    DEFAULT_EPS,
    GmiEstimate,
    MetricFactors,
    PosteriorStats,
    TruncatedSpectrum,
    hermitian_eigh,
    psi,
    solve_delta_eps,
    truncate_spectrum,
)
from .errors import (
    AcceptanceRateError,
    AssumptionViolation,
    BudgetExceeded,
    ConvergenceError,
    DomainError,
    NumericalError,
    ToleranceBreach,
    VecGnndrError,
)
from .expectation import StreamingMoments, chi2_expectation, derive_stream
from .gmi import (
    FixedMetricGmiInput,
    gmi_fixed_metric,
    maximize_theta,
    optimal_gmi,
    optimal_gmi_closed,
    optimal_metric,
)
from .restricted import RestrictedVariantResult, cmsf, csi_msf, csi_ssf, cssf, linear_variant, ordering_check

__version__ = "0.1.0"

__all__ = [
    "AcceptanceRateError",
    "AssumptionViolation",
    "BudgetExceeded",
    "ConvergenceError",
    "DEFAULT_EPS",
    "DomainError",
    "FixedMetricGmiInput",
    "GmiEstimate",
    "MetricFactors",
    "NumericalError",
    "PosteriorStats",
    "RestrictedVariantResult",
    "StreamingMoments",
    "ToleranceBreach",
    "TruncatedSpectrum",
    "VecGnndrError",
    "chi2_expectation",
    "cmsf",
    "csi_msf",
    "csi_ssf",
    "cssf",
    "derive_stream",
    "gmi_fixed_metric",
    "hermitian_eigh",
    "linear_variant",
    "maximize_theta",
    "optimal_gmi",
    "optimal_gmi_closed",
    "optimal_metric",
    "ordering_check",
    "psi",
    "solve_delta_eps",
    "truncate_spectrum",
]
