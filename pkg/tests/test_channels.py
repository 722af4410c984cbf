import numpy as np
import pytest
from scipy import special

from helpers import random_hermitian_psd
from vecgnndr import DomainError, optimal_gmi
from vecgnndr.channels import (
    AcgncChannel,
    AcgncParams,
    BlockNoncoherentChannel,
    BlockNoncoherentParams,
    PhaseNoiseChannel,
    PhaseNoiseParams,
    StateAcgncChannel,
    acgnc_gmi_value,
    acgnc_posterior_stats,
    bnc_elementwise_gmi,
    bnc_elementwise_limit,
    bnc_large_block_limit,
    bnc_lower_bound,
    bnc_metric_provider,
    bnc_optimal_gmi,
    bnc_optimal_metric,
    bnc_posterior_stats,
    bnc_squeeze_halfwidth,
    memoryless_gnndr,
    phase_covariance,
    pnc_correlations,
    pnc_identity_gmi,
    pnc_identity_limit,
    pnc_identity_objective,
    pnc_identity_theta,
    pnc_linear_gmi,
    pnc_linear_limit,
    pnc_posterior_stats,
    snr_to_sigma2,
)

# high-precision quadrature reference values (independent mpmath integration)
BNC_OPT = {(2, 0.0): 0.101177320267085, (2, 10.0): 0.766090347273602, (5, 10.0): 1.19106797426718, (10, 10.0): 1.3399239274324}


def test_snr_conversion():
    assert snr_to_sigma2(10.0) == pytest.approx(0.1)
    assert snr_to_sigma2(0.0, 2.0) == pytest.approx(2.0)


class TestBlockNoncoherent:
    def test_posterior_spectrum_example(self):
        p = BlockNoncoherentParams(2, 1.0, 1.0)
        st = bnc_posterior_stats(np.array([1.0, 0.0]), p)
        np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(st.sigma))[::-1], [0.75, 0.5], atol=1e-14)
        np.testing.assert_array_equal(st.mu, 0)

    @pytest.mark.parametrize("key", sorted(BNC_OPT))
    def test_optimal_gmi_reference(self, key):
        B, snr = key
        est = bnc_optimal_gmi(BlockNoncoherentParams(B, 1.0, snr_to_sigma2(snr)))
        assert est.value == pytest.approx(BNC_OPT[key], abs=1e-9)
        assert est.method == "quadrature" and est.std_err == 0

    def test_quadrature_matches_monte_carlo(self):
        p = BlockNoncoherentParams(3, 1.0, 0.3)
        ch = BlockNoncoherentChannel(p)
        mc = optimal_gmi(ch.stats_sampler(), 1.0, 100_000, np.random.default_rng(8))
        assert abs(mc.value - bnc_optimal_gmi(p).value) <= 4 * mc.std_err

    def test_elementwise_limit_constant(self):
        assert bnc_elementwise_limit() == pytest.approx(np.euler_gamma - np.exp(-1) + special.exp1(1.0), abs=1e-14)
        assert bnc_elementwise_limit() == pytest.approx(0.42872, abs=1e-5)

    def test_elementwise_independent_of_block(self):
        a = bnc_elementwise_gmi(BlockNoncoherentParams(2, 1.0, 0.1)).value
        b = bnc_elementwise_gmi(BlockNoncoherentParams(7, 1.0, 0.1)).value
        assert a == b

    def test_bounds_and_squeeze(self):
        for B in (2, 5, 20):
            p = BlockNoncoherentParams(B, 1.0, 0.1)
            val = bnc_optimal_gmi(p).value
            assert val >= bnc_lower_bound(p)
            assert abs(val - bnc_large_block_limit(p)) <= bnc_squeeze_halfwidth(p)

    def test_metric_two_branches(self):
        p = BlockNoncoherentParams(2, 1.0, 1.0)
        weak = bnc_optimal_metric(np.array([0.5, 0.0]), p)
        strong = bnc_optimal_metric(np.array([3.0, 0.0]), p)
        assert weak.rows == 2 and strong.rows == 1

    def test_provider_matches_single(self, rng):
        p = BlockNoncoherentParams(3, 1.0, 0.5)
        ys = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
        batch = bnc_metric_provider(p)(ys)
        x = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        for k in range(6):
            single = bnc_optimal_metric(ys[k], p).padded(3)
            assert np.sum(np.abs(batch.f[k] @ x) ** 2) == pytest.approx(single.distance(x), rel=1e-10)

    def test_rejects_bad_params(self):
        with pytest.raises(DomainError):
            BlockNoncoherentParams(0, 1.0, 1.0)
        with pytest.raises(DomainError):
            BlockNoncoherentParams(2, 1.0, 0.0)


class TestPhaseNoise:
    def test_phase_covariance_is_wiener(self):
        p = PhaseNoiseParams(3, 1.0, 1.0, 0.5)
        np.testing.assert_allclose(phase_covariance(p), 0.25 * np.minimum.outer([1, 2, 3], [1, 2, 3]))

    def test_posterior_matches_monte_carlo(self, rng):
        p = PhaseNoiseParams(2, 1.0, 0.5, 0.4)
        ch = PhaseNoiseChannel(p)
        y = np.array([0.8 - 0.3j, 0.2 + 1.0j])
        # p(y | phi) does not depend on phi, so prior phase draws are posterior draws
        from vecgnndr.channels import sample_phases

        phi = sample_phases(p, rng, 400_000)
        k = p.P / (p.P + p.sigma2)
        m = k * np.exp(-1j * phi) * y
        mu = m.mean(axis=0)
        cov = np.cov(m.T, bias=True) + k * p.sigma2 * np.eye(2)
        st = ch.posterior(y)
        np.testing.assert_allclose(st.mu, mu, atol=5e-3)
        np.testing.assert_allclose(st.sigma, cov, atol=5e-3)

    def test_correlations_match_samples(self, rng):
        p = PhaseNoiseParams(3, 1.0, 0.5, 0.3)
        d = PhaseNoiseChannel(p).sample(rng, 200_000)
        rxy, ryy = pnc_correlations(p)
        np.testing.assert_allclose(d.x.T @ d.y.conj() / len(d), rxy, atol=1.5e-2)
        np.testing.assert_allclose(d.y.T @ d.y.conj() / len(d), ryy, atol=1.5e-2)

    def test_linear_value_example(self):
        est, gamma, pi = pnc_linear_gmi(PhaseNoiseParams(2, 1.0, 1.0, 0.1))
        assert est.value == pytest.approx(0.67839277062845, abs=1e-12)
        assert gamma.shape == pi.shape == (2, 2)

    def test_linear_limit(self):
        p = PhaseNoiseParams(5, 1.0, 1e-9, 0.5)
        assert pnc_linear_gmi(p)[0].value == pytest.approx(pnc_linear_limit(5, 0.5), abs=1e-6)

    def test_identity_limit_example(self):
        assert pnc_identity_limit(2, 0.5) == pytest.approx(1.12366172157, abs=1e-9)

    def test_identity_theta_is_stationary(self):
        p = PhaseNoiseParams(5, 1.0, 0.3, 0.5)
        th = pnc_identity_theta(p)
        h = 1e-6 * abs(th)
        assert pnc_identity_objective(th + h, p) <= pnc_identity_objective(th, p)
        assert pnc_identity_objective(th - h, p) <= pnc_identity_objective(th, p)

    def test_identity_below_linear(self):
        for c in (0.1, 0.5):
            for s2 in (1.0, 0.1, 0.01):
                p = PhaseNoiseParams(2, 1.0, s2, c)
                assert pnc_identity_gmi(p).value <= pnc_linear_gmi(p)[0].value + 1e-12

    def test_coherent_limit(self):
        p = PhaseNoiseParams(2, 1.0, 0.5, 0.0)
        st = pnc_posterior_stats(np.array([1.0, 1j]), p)
        np.testing.assert_allclose(st.sigma, (1 / 3) * np.eye(2), atol=1e-14)


class TestAcgnc:
    def test_posterior_formula(self, rng):
        B = 3
        A = rng.standard_normal((B, B)) + 1j * rng.standard_normal((B, B))
        S = random_hermitian_psd(rng, B) + 0.1 * np.eye(B)
        p = AcgncParams(A, S, 2.0)
        y = rng.standard_normal(B) + 1j * rng.standard_normal(B)
        st = acgnc_posterior_stats(y, p)
        Ryy = 2.0 * A @ A.conj().T + S
        gain = 2.0 * A.conj().T @ np.linalg.inv(Ryy)
        np.testing.assert_allclose(st.mu, gain @ y, atol=1e-10)
        np.testing.assert_allclose(st.sigma, 2.0 * np.eye(B) - gain @ A * 2.0, atol=1e-10)

    def test_gmi_is_capacity(self):
        p = AcgncParams(np.diag([1.0, 0.5]), np.diag([0.1, 0.2]), 1.0)
        expected = 0.5 * (np.log(1 + 1 / 0.1) + np.log(1 + 0.25 / 0.2))
        assert acgnc_gmi_value(p) == pytest.approx(expected, abs=1e-14)

    def test_rejects_non_pd_noise(self):
        with pytest.raises(DomainError):
            AcgncParams(np.eye(2), np.diag([1.0, -1.0]), 1.0)

    def test_state_channel(self, rng):
        ch = StateAcgncChannel([np.eye(2), 0.5 * np.eye(2)], [0.3, 0.7], 0.1 * np.eye(2), 1.0)
        d = ch.sample(rng, 5000)
        assert set(np.unique(d.v)) == {0, 1}
        assert np.mean(d.v == 1) == pytest.approx(0.7, abs=0.03)
        assert not ch.state_degenerate
        assert StateAcgncChannel([np.eye(2)], [1.0], np.eye(2), 1.0).state_degenerate


class TestMemoryless:
    def test_awgn_capacity(self):
        P, s2 = 1.0, 0.25

        def sampler(rng, n):
            x = np.sqrt(P / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
            y = x + np.sqrt(s2 / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
            k = P / (P + s2)
            return k * y, np.full(n, P * s2 / (P + s2))

        est, metric = memoryless_gnndr(sampler, P, rng=np.random.default_rng(0), n_samples=100_000)
        assert est.value == pytest.approx(np.log(1 + P / s2), abs=4 * est.std_err)
        m = metric(np.array([0.3 + 0.1j]), np.array([0.2]))
        assert m.f.shape[-2:] == (1, 1)
