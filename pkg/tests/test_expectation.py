import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from vecgnndr import DomainError, StreamingMoments, chi2_expectation, derive_stream
from vecgnndr.expectation import complex_normal, mean_and_stderr, parallel_map, resolve_threads


def test_streams_reproducible_and_distinct():
    a = derive_stream(5, 3).standard_normal(8)
    b = derive_stream(5, 3).standard_normal(8)
    c = derive_stream(5, 4).standard_normal(8)
    d = derive_stream(6, 3).standard_normal(8)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    assert not np.allclose(a, d)


def test_stream_rejects_negative_index():
    with pytest.raises(DomainError):
        derive_stream(0, -1)


def test_streams_uncorrelated():
    x = np.stack([derive_stream(1, k).standard_normal(20000) for k in range(4)])
    c = np.corrcoef(x)
    assert np.max(np.abs(c - np.eye(4))) < 0.04


def test_complex_normal_variance(rng):
    z = complex_normal(rng, 200_000, 2.0)
    assert np.var(z.real) == pytest.approx(1.0, rel=0.02)
    assert np.var(z.imag) == pytest.approx(1.0, rel=0.02)
    assert np.mean(np.abs(z) ** 2) == pytest.approx(2.0, rel=0.02)


@settings(max_examples=50, deadline=None)
@given(
    data=st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=60),
    split=st.integers(0, 60),
)
def test_streaming_merge_matches_batch(data, split):
    x = np.array(data)
    k = min(split, x.size)
    a = StreamingMoments().update(x[:k]) if k else StreamingMoments()
    b = StreamingMoments().update(x[k:]) if k < x.size else StreamingMoments()
    m = a.merge(b)
    assert m.count == x.size
    assert float(m.mean) == pytest.approx(float(np.mean(x)), abs=1e-9 * (1 + np.abs(x).max()))
    assert float(m.variance) == pytest.approx(float(np.var(x, ddof=1)), rel=1e-7, abs=1e-7)


def test_mean_and_stderr():
    m, se = mean_and_stderr(np.array([1.0, 2.0, 3.0, 4.0]))
    assert m == 2.5
    assert se == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)


def test_chi2_expectation_moments():
    assert chi2_expectation(lambda t: t, 4) == pytest.approx(4.0, abs=1e-9)
    assert chi2_expectation(lambda t: t**2, 3) == pytest.approx(3 * 5.0, abs=1e-8)


def test_chi2_expectation_log():
    # E[log T] for chi2(k) is digamma(k/2) + log 2
    assert chi2_expectation(np.log, 6) == pytest.approx(special.digamma(3.0) + np.log(2.0), abs=1e-9)


def test_chi2_expectation_truncated_domain():
    from scipy import stats

    assert chi2_expectation(lambda t: np.ones_like(t), 4, (0.0, 2.0)) == pytest.approx(stats.chi2(4).cdf(2.0), abs=1e-10)


def test_parallel_map_independent_of_threads():
    fn = lambda k: float(derive_stream(3, k).standard_normal())  # noqa: E731
    assert parallel_map(fn, range(10), 1) == parallel_map(fn, range(10), 4)


def test_resolve_threads_env(monkeypatch):
    monkeypatch.setenv("VECGNNDR_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(2) == 2
    monkeypatch.delenv("VECGNNDR_THREADS")
    assert resolve_threads(None) == 1
    with pytest.raises(DomainError):
        resolve_threads(0)
