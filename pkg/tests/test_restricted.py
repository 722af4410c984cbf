import numpy as np
import pytest

from vecgnndr import DomainError, GmiEstimate, NumericalError, PosteriorStats, optimal_gmi
from vecgnndr.channels import (
    AcgncChannel,
    AcgncParams,
    PhaseNoiseChannel,
    PhaseNoiseParams,
    StateAcgncChannel,
    acgnc_gmi_value,
    pnc_correlations,
    pnc_linear_gmi,
)
from vecgnndr.core import JointDraws
from vecgnndr.gmi import FixedMetricGmiInput, gmi_fixed_metric
from vecgnndr.restricted import (
    cmsf,
    cmsf_from_stats,
    csi_msf,
    csi_ssf,
    cssf,
    cssf_from_stats,
    linear_design,
    linear_variant,
    linear_variant_sampled,
    ordering_check,
)


def _const_stats(sigma, n=200):
    B = sigma.shape[0]
    rng = np.random.default_rng(0)
    mu = rng.standard_normal((n, B)) + 0j
    return PosteriorStats(mu, np.broadcast_to(sigma, (n, B, B)).copy())


def test_cssf_constant_covariance():
    s = np.diag([0.2, 0.4]).astype(complex)
    r = cssf_from_stats(_const_stats(s), 1.0)
    assert r.gmi.value == pytest.approx(np.log(1 / 0.3), abs=1e-12)
    assert r.gmi.std_err < 1e-15


def test_cmsf_constant_covariance():
    s = np.diag([0.2, 0.4]).astype(complex)
    r = cmsf_from_stats(_const_stats(s), 1.0)
    assert r.gmi.value == pytest.approx(0.5 * (np.log(5) + np.log(2.5)), abs=1e-12)


def test_cmsf_drops_directions_above_power():
    s = np.diag([2.0, 0.5]).astype(complex)
    r = cmsf_from_stats(_const_stats(s), 1.0)
    assert r.gmi.value == pytest.approx(0.5 * np.log(2.0), abs=1e-12)


def test_cssf_zero_when_average_exceeds_power():
    r = cssf_from_stats(_const_stats(np.diag([3.0, 0.5]).astype(complex)), 1.0)
    assert r.gmi.value == 0.0


def test_metric_provider_needs_posterior():
    r = cssf_from_stats(_const_stats(np.diag([0.2, 0.4]).astype(complex)), 1.0)
    with pytest.raises(DomainError):
        r.metric_provider(np.zeros((1, 2)))


def test_cmsf_metric_achieves_its_gmi():
    P = 1.0
    p = PhaseNoiseParams(2, P, 0.3, 0.5)
    ch = PhaseNoiseChannel(p)
    r = cmsf(ch.stats_sampler(), P, 100_000, np.random.default_rng(1), posterior=ch.posterior)
    inp = FixedMetricGmiInput(lambda g, n: ch.sample(g, n), r.metric_provider, P, 100_000)
    est = gmi_fixed_metric(inp, np.random.default_rng(2))
    assert abs(est.value - r.gmi.value) <= 3 * np.hypot(est.std_err, r.gmi.std_err)


def test_cmsf_delta_method_se_is_calibrated():
    P = 1.0
    ch = PhaseNoiseChannel(PhaseNoiseParams(2, P, 0.1, 0.5))
    vals, ses = [], []
    for k in range(30):
        r = cmsf(ch.stats_sampler(), P, 2000, np.random.default_rng(100 + k))
        vals.append(r.gmi.value)
        ses.append(r.gmi.std_err)
    assert np.std(vals, ddof=1) == pytest.approx(np.mean(ses), rel=0.35)


def test_pnc_lin_equals_cmsf_in_expectation():
    P = 1.0
    p = PhaseNoiseParams(2, P, 0.5, 0.5)
    ch = PhaseNoiseChannel(p)
    r = cmsf(ch.stats_sampler(), P, 100_000, np.random.default_rng(5))
    lin = pnc_linear_gmi(p)[0].value
    assert abs(r.gmi.value - lin) <= 4 * r.gmi.std_err


@pytest.mark.parametrize("B,c", [(2, 0.1), (2, 0.5), (5, 0.1), (5, 0.5)])
def test_linear_variant_matches_closed_form(B, c):
    p = PhaseNoiseParams(B, 1.0, 1.0, c)
    rxy, ryy = pnc_correlations(p)
    r = linear_variant(lambda v: (rxy, ryy), 1.0)
    assert r.gmi.value == pytest.approx(pnc_linear_gmi(p)[0].value, abs=1e-9)
    assert r.gmi.method == "closed"


def test_linear_variant_sampled():
    p = PhaseNoiseParams(2, 1.0, 1.0, 0.5)
    d = PhaseNoiseChannel(p).sample(np.random.default_rng(9), 100_000)
    r = linear_variant_sampled(d.x, d.y, 1.0)
    assert abs(r.gmi.value - pnc_linear_gmi(p)[0].value) <= 3 * r.gmi.std_err
    assert r.gmi.std_err > 0


def test_linear_on_acgnc_is_optimal():
    A = np.array([[1.0, 0.3], [0.1, 0.8]], dtype=complex)
    S = np.array([[0.2, 0.05], [0.05, 0.3]], dtype=complex)
    p = AcgncParams(A, S, 1.0)
    r = linear_variant(lambda v: (A.conj().T, A @ A.conj().T + S), 1.0)
    assert r.gmi.value == pytest.approx(acgnc_gmi_value(p), abs=1e-10)


def test_linear_design_rejects_saturated():
    with pytest.raises(NumericalError):
        linear_design(np.eye(2), np.eye(2), 1.0)


def test_linear_design_pinv_handles_singular_ryy():
    rxy = np.array([[0.5, 0.0], [0.0, 0.0]], dtype=complex)
    ryy = np.diag([1.0, 0.0]).astype(complex)
    d = linear_design(rxy, ryy, 1.0)
    assert d.value == pytest.approx(0.5 * np.log(1 / 0.75), abs=1e-12)


class TestCsi:
    def _channel(self):
        return StateAcgncChannel(
            [np.diag([1.0, 0.2]), np.diag([0.3, 1.0])], [0.5, 0.5], 0.2 * np.eye(2), 1.0
        )

    def test_degenerate_state_collapses(self):
        ch = AcgncChannel(AcgncParams(np.diag([1.0, 0.5]), 0.2 * np.eye(2), 1.0))
        a = csi_msf(ch, 1.0, 10_000, np.random.default_rng(3))
        b = cmsf(ch.stats_sampler(), 1.0, 10_000, np.random.default_rng(3))
        assert a.gmi.value == b.gmi.value
        a = csi_ssf(ch, 1.0, 10_000, np.random.default_rng(3))
        b = cssf(ch.stats_sampler(), 1.0, 10_000, np.random.default_rng(3))
        assert a.gmi.value == b.gmi.value

    def test_csi_beats_csi_free(self):
        ch = self._channel()
        rng = np.random.default_rng(4)
        res = {
            "cssf": cssf(ch.stats_sampler(), 1.0, 40_000, rng).gmi,
            "cmsf": cmsf(ch.stats_sampler(), 1.0, 40_000, rng).gmi,
            "csi_ssf": csi_ssf(ch, 1.0, 40_000, rng).gmi,
            "csi_msf": csi_msf(ch, 1.0, 40_000, rng).gmi,
        }
        assert res["csi_msf"].value > res["cmsf"].value
        assert res["csi_ssf"].value > res["cssf"].value

    def test_csi_metric_provider_batches(self):
        ch = self._channel()
        r = csi_msf(ch, 1.0, 10_000, np.random.default_rng(1))
        d = ch.sample(np.random.default_rng(2), 7)
        m = r.metric_provider(d.y, d.v)
        assert m.f.shape[0] == 7


def test_ordering_check_reports_failures():
    g = lambda v, s=0.0: GmiEstimate(v, s, 10)  # noqa: E731
    good = {"cssf": g(0.5), "cmsf": g(0.6), "csi_ssf": g(0.55), "csi_msf": g(0.7), "lin": g(0.65)}
    assert ordering_check(good, g(0.8)).passed
    bad = dict(good, lin=g(0.75))
    rep = ordering_check(bad, g(0.8))
    assert not rep.passed
    assert "FAIL csi_msf >= lin" in str(rep)
    # within slack is tolerated
    assert ordering_check(dict(good, lin=g(0.71, 0.01)), g(0.8)).passed


def test_ordering_check_requires_all_variants():
    with pytest.raises(DomainError):
        ordering_check({"cssf": GmiEstimate(0.1, 0, 1)}, GmiEstimate(0.2, 0, 1))


def test_ordering_holds_on_phase_noise():
    P = 1.0
    p = PhaseNoiseParams(2, P, 0.1, 0.1)
    ch = PhaseNoiseChannel(p)
    draws: JointDraws = ch.sample(np.random.default_rng(0), 50_000)
    stats = ch.posterior(draws.y)
    res = {
        "cssf": cssf_from_stats(stats, P).gmi,
        "cmsf": cmsf_from_stats(stats, P).gmi,
        "csi_ssf": csi_ssf(ch, P, 50_000, np.random.default_rng(1)).gmi,
        "csi_msf": csi_msf(ch, P, 50_000, np.random.default_rng(1)).gmi,
        "lin": pnc_linear_gmi(p)[0],
    }
    opt = optimal_gmi(ch.stats_sampler(), P, 50_000, np.random.default_rng(0))
    assert ordering_check(res, opt).passed
