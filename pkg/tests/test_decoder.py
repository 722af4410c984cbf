import numpy as np
import pytest

from vecgnndr import BudgetExceeded, DomainError, MetricFactors, optimal_metric
from vecgnndr.channels import PhaseNoiseChannel, PhaseNoiseParams
from vecgnndr.decoder import (
    block_error_rate,
    decode,
    ensemble_error_rate,
    generate_codebook,
    log_lower_tail,
    message_count,
    metric_distances,
    wilson_interval,
)

CH = PhaseNoiseChannel(PhaseNoiseParams(2, 1.0, 0.5, 0.3))


def provider(y, v=None):
    return optimal_metric(CH.posterior(y), 1.0)


def test_codebook_shape_and_power(rng):
    cb = generate_codebook(2000, 3, 2, 2.0, rng=rng)
    assert cb.words.shape == (2000, 3, 2)
    assert np.mean(np.abs(cb.words) ** 2) == pytest.approx(2.0, rel=0.05)
    assert cb.rate == pytest.approx(np.log(2000) / 6)
    with pytest.raises(DomainError):
        generate_codebook(4, 2, 2, 1.0, Sigma=np.diag([1.0, -1.0]))


def test_message_count():
    assert message_count(0.0, 10, 2) == 1.0
    assert message_count(np.log(2) / 2, 1, 2) == 2.0
    with pytest.raises(DomainError):
        message_count(-0.1, 1, 1)


def test_single_message_never_errs(rng):
    r = block_error_rate(CH, provider, 0.0, 4, 50, rng)
    assert r.M == 1 and r.error_rate == 0.0
    e = ensemble_error_rate(CH, provider, 0.0, 4, 50, rng)
    assert e.error_rate == 0.0


def test_decision_invariant_to_metric_scale(rng):
    cb = generate_codebook(64, 4, 2, 1.0, rng=rng)
    ys, vs = CH.respond(cb.words[7], rng)

    def scaled(y, v=None):
        m = provider(y, v)
        return MetricFactors(3.0 * m.g, 3.0 * m.f)

    assert decode(provider, cb, (ys, vs)) == decode(scaled, cb, (ys, vs))


def test_decode_picks_noiseless_word(rng):
    cb = generate_codebook(32, 3, 2, 1.0, rng=rng)
    ident = lambda y, v=None: MetricFactors(y, np.broadcast_to(np.eye(2), y.shape + (2,)))  # noqa: E731
    assert decode(ident, cb, (cb.words[11], None)) == 11
    with pytest.raises(DomainError):
        decode(ident, cb, (cb.words[11][:2], None))


def test_metric_distances_chunking(rng):
    cb = generate_codebook(50, 2, 2, 1.0, rng=rng)
    m = provider(CH.respond(cb.words[0], rng)[0])
    np.testing.assert_allclose(metric_distances(m, cb.words, chunk=7), metric_distances(m, cb.words), rtol=1e-14)


def test_explicit_budget():
    with pytest.raises(BudgetExceeded):
        block_error_rate(CH, provider, 2.0, 10, 10, np.random.default_rng(0))


def test_wilson_interval():
    lo, hi = wilson_interval(0, 100)
    assert lo == pytest.approx(0.0, abs=1e-15) and 0 < hi < 0.05
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi and hi - lo == pytest.approx(2 * 1.96 * 0.05, rel=0.02)
    with pytest.raises(DomainError):
        wilson_interval(0, 0)


def test_saddlepoint_tail_matches_monte_carlo(rng):
    a2 = np.array([[0.5, 1.2, 0.1]])
    v = np.array([[1.0, 0.4, 2.0]])
    z = (rng.standard_normal((2_000_000, 3)) + 1j * rng.standard_normal((2_000_000, 3))) / np.sqrt(2)
    s = np.sum(np.abs(np.sqrt(a2) - np.sqrt(v) * z) ** 2, axis=1)
    for q in (1e-3, 1e-2, 0.2, 0.6):
        d = np.quantile(s, q)
        p = np.exp(log_lower_tail(a2, v, np.array([d])))[0]
        assert p == pytest.approx(q, rel=0.08)


def test_lower_tail_below_fixed_part_is_impossible():
    out = log_lower_tail(np.array([[2.0, 1.0]]), np.array([[0.0, 1.0]]), np.array([1.5]))
    assert out[0] == -np.inf


@pytest.mark.parametrize("R", [0.4, 0.6])
def test_explicit_and_ensemble_agree(R):
    a = block_error_rate(CH, provider, R, 5, 2000, np.random.default_rng(0))
    b = ensemble_error_rate(CH, provider, R, 5, 4000, np.random.default_rng(1))
    assert a.M == b.M
    assert abs(a.error_rate - b.error_rate) <= np.hypot(a.half_width, b.half_width)


def test_ensemble_handles_huge_message_counts():
    r = ensemble_error_rate(CH, provider, 0.3, 200, 200, np.random.default_rng(2))
    assert r.M > 1e50
    assert 0.0 <= r.error_rate < 1e-3


def test_ensemble_beyond_float_range():
    r = ensemble_error_rate(CH, provider, 2.0, 200, 50, np.random.default_rng(3))
    assert np.isinf(r.M)
    assert r.error_rate == pytest.approx(1.0)
