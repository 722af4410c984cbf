import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from helpers import random_hermitian_psd
from vecgnndr import (
    DomainError,
    FixedMetricGmiInput,
    MetricFactors,
    PosteriorStats,
    gmi_fixed_metric,
    maximize_theta,
    optimal_gmi,
    optimal_metric,
)
from vecgnndr.channels import (
    AcgncChannel,
    AcgncParams,
    BlockNoncoherentChannel,
    BlockNoncoherentParams,
    PhaseNoiseChannel,
    PhaseNoiseParams,
    acgnc_gmi_value,
    acgnc_optimal,
    bnc_optimal_gmi,
    pnc_identity_A,
    pnc_identity_gmi,
    pnc_identity_theta,
)
from vecgnndr.gmi import (
    psi_form_integrand,
    logdet_form_integrand,
    gmi_from_terms,
    metric_terms,
    optimal_gmi_closed,
    orthogonality_residual,
)


def _awgn_sampler(P, s2, B):
    def sample(rng, n):
        from vecgnndr.core import JointDraws
        from vecgnndr.expectation import complex_normal

        x = complex_normal(rng, (n, B), P)
        return JointDraws(x, x + complex_normal(rng, (n, B), s2))

    return sample


def test_awgn_matched_metric_gives_capacity(rng):
    P, s2, B = 1.0, 0.5, 2
    inp = FixedMetricGmiInput(_awgn_sampler(P, s2, B), lambda y, v: MetricFactors(y, np.broadcast_to(np.eye(B), y.shape + (B,))), P, 50_000)
    est = gmi_fixed_metric(inp, rng)
    assert est.value == pytest.approx(np.log(1 + P / s2), abs=4 * est.std_err + 1e-3)


def test_theta_optimum_known():
    # identity rule on phase noise: the closed-form optimiser is the maximiser of the objective
    p = PhaseNoiseParams(2, 1.0, 0.1, 0.1)
    assert pnc_identity_theta(p) == pytest.approx(-8.688206972, abs=1e-6)
    assert pnc_identity_gmi(p).value == pytest.approx(2.25876685453, abs=1e-9)


def test_maximize_theta_matches_grid(rng):
    B, P, s2 = 2, 1.0, 0.3
    x = rng.standard_normal((4000, B)) + 1j * rng.standard_normal((4000, B))
    y = 0.8 * x + np.sqrt(s2) * (rng.standard_normal((4000, B)) + 1j * rng.standard_normal((4000, B)))
    m = MetricFactors(y, np.broadcast_to(np.eye(B), y.shape + (B,)))
    terms = metric_terms(x, m)
    res = maximize_theta(terms, 2.0)
    grid = np.linspace(-5, -1e-3, 20001)
    best = max(terms.objective(t, 2.0) for t in grid) / B
    assert res.value >= best - 1e-9
    assert res.value == pytest.approx(best, abs=1e-6)


def test_degenerate_metric_gives_zero(rng):
    x = rng.standard_normal((500, 2)) + 0j
    m = MetricFactors(np.zeros((500, 2), complex), np.zeros((500, 2, 2), complex))
    est = gmi_from_terms(metric_terms(x, m), 1.0)
    assert est.value == 0.0
    assert "degenerate" in est.flags


def test_theta_must_be_negative(rng):
    inp = FixedMetricGmiInput(_awgn_sampler(1.0, 1.0, 1), lambda y, v: MetricFactors(y, y[..., None]), 1.0, 200)
    with pytest.raises(DomainError):
        gmi_fixed_metric(inp, rng, theta=0.5)


def test_n_samples_guard():
    with pytest.raises(DomainError):
        FixedMetricGmiInput(_awgn_sampler(1.0, 1.0, 1), None, 1.0, 10)


@pytest.mark.parametrize("snr_db", [0.0, 10.0])
def test_optimal_metric_at_unit_theta_matches_quadrature(snr_db):
    P = 1.0
    p = BlockNoncoherentParams(2, P, P / 10 ** (snr_db / 10))
    ch = BlockNoncoherentChannel(p)

    def metric(y, v=None):
        return optimal_metric(ch.posterior(y), P)

    inp = FixedMetricGmiInput(lambda r, n: ch.sample(r, n), metric, P, 100_000)
    est = gmi_fixed_metric(inp, np.random.default_rng(3), theta=-1.0)
    ref = bnc_optimal_gmi(p).value
    assert abs(est.value - ref) <= 3 * est.std_err


def test_acgnc_closed_form_equals_logdet():
    rng = np.random.default_rng(1)
    for _ in range(10):
        B = int(rng.integers(1, 5))
        A = rng.standard_normal((B, B)) + 1j * rng.standard_normal((B, B))
        S = random_hermitian_psd(rng, B) + 0.1 * np.eye(B)
        p = AcgncParams(A, S, float(rng.uniform(0.5, 3)))
        ch = AcgncChannel(p)
        est = optimal_gmi_closed(ch.stats_sampler(), p.P, 3, rng)
        assert est.value == pytest.approx(acgnc_gmi_value(p), abs=1e-9)


def test_optimal_metric_recovers_ml_on_acgnc(rng):
    from vecgnndr.channels import acgnc_ml_distance

    B = 3
    A = rng.standard_normal((B, B)) + 1j * rng.standard_normal((B, B))
    S = random_hermitian_psd(rng, B) + 0.2 * np.eye(B)
    p = AcgncParams(A, S, 1.0)
    _, metric = acgnc_optimal(p)
    y = rng.standard_normal(B) + 1j * rng.standard_normal(B)
    xs = rng.standard_normal((50, B)) + 1j * rng.standard_normal((50, B))
    d_opt = metric(y).distance(xs)
    d_ml = acgnc_ml_distance(y, xs, p)
    # equal up to a positive scale and an x-independent offset: compare orderings
    assert np.array_equal(np.argsort(d_opt), np.argsort(d_ml))


def test_synthesized_metric_is_gmi_optimal_against_perturbations():
    P = 1.0
    p = PhaseNoiseParams(2, P, 0.2, 0.5)
    ch = PhaseNoiseChannel(p)
    base = optimal_gmi(ch.stats_sampler(), P, 40_000, np.random.default_rng(2)).value

    def perturbed(scale):
        def metric(y, v=None):
            m = optimal_metric(ch.posterior(y), P)
            return MetricFactors(m.g, m.f * scale)

        return metric

    for scale in (0.8, 1.25):
        inp = FixedMetricGmiInput(lambda r, n: ch.sample(r, n), perturbed(scale), P, 40_000)
        est = gmi_fixed_metric(inp, np.random.default_rng(2))
        assert est.value <= base + 3 * est.std_err


class TestEquivalentForms:
    def _stats(self, rng, n=400, B=3):
        mu = rng.standard_normal((n, B)) + 1j * rng.standard_normal((n, B))
        sig = np.stack([random_hermitian_psd(rng, B, scale=rng.uniform(0.1, 2.0)) for _ in range(n)])
        return PosteriorStats(mu, sig)

    def test_difference_is_orthogonality_residual(self, rng):
        st_ = self._stats(rng)
        diff = psi_form_integrand(st_, 1.0) - logdet_form_integrand(st_, 1.0)
        np.testing.assert_allclose(diff, orthogonality_residual(st_, 1.0), atol=1e-12)

    @pytest.mark.parametrize(
        "channel",
        [
            BlockNoncoherentChannel(BlockNoncoherentParams(3, 1.0, 0.5)),
            PhaseNoiseChannel(PhaseNoiseParams(3, 1.0, 0.5, 0.3)),
            AcgncChannel(AcgncParams(np.array([[1.0, 0.4], [0.0, 0.7]]), 0.3 * np.eye(2), 1.0)),
        ],
    )
    def test_orthogonality_identity_in_mean(self, channel):
        d = channel.sample(np.random.default_rng(4), 200_000)
        r = orthogonality_residual(channel.posterior(d.y, d.v), channel.P)
        assert abs(r.mean()) <= 4 * r.std() / np.sqrt(r.size)

    def test_optimal_gmi_reports_lower_variance_than_raw_form(self):
        ch = PhaseNoiseChannel(PhaseNoiseParams(2, 1.0, 1.0, 0.1))
        d = ch.sample(np.random.default_rng(0), 20_000)
        st_ = ch.posterior(d.y)
        raw = psi_form_integrand(st_, 1.0)
        est = optimal_gmi(ch.stats_sampler(), 1.0, 20_000, np.random.default_rng(0))
        assert est.std_err < raw.std() / np.sqrt(raw.size)
        assert est.value == pytest.approx(raw.mean(), abs=4 * raw.std() / np.sqrt(raw.size))


@settings(max_examples=30, deadline=None)
@given(scale=st.floats(0.05, 20.0), P=st.floats(0.2, 5.0))
@example(scale=14.75, P=4.375)  # both eigenvalues above P
def test_optimal_metric_scale_consistency(scale, P):
    # f^H f has eigenvalues (P - t)/(P t); every direction at or above P gets the one offset set by the largest
    from vecgnndr import solve_delta_eps

    s = scale * np.diag([1.0, 0.3]).astype(complex)
    m = optimal_metric(PosteriorStats(np.array([0.2, -0.1j]), s), P)
    w = np.sort(np.linalg.eigvalsh(m.f.conj().T @ m.f))[::-1]
    lam = np.diag(s).real
    expected = np.sort(np.where(lam < P, (P - lam) / (P * lam), solve_delta_eps(lam.max(), P)))[::-1]
    np.testing.assert_allclose(w, expected, atol=1e-5 * max(1.0, expected.max()))


def test_identity_objective_concave_peak():
    p = PhaseNoiseParams(5, 1.0, 0.1, 0.5)
    th = pnc_identity_theta(p)
    assert th < 0
    A = pnc_identity_A(p)
    assert A > p.sigma2
