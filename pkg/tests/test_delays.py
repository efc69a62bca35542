import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special, stats

from seclat.delays import (
    DelaySpec,
    MaxDelay,
    ModelParams,
    c_alpha_pmf,
    c_b0_pmf,
    max_delay_spec,
    mixed_poisson_pmf,
    quadrature_mixed_poisson,
)
from seclat.pmf import ccdf, dense, mean


def entries(p, hi=None):
    hi = p.last if hi is None else hi
    return dense(p, 0, hi)


# -- DelaySpec -----------------------------------------------------------------


@pytest.mark.parametrize(
    "bad",
    [
        dict(kind="deterministic", d=-1.0),
        dict(kind="exponential", rate=0.0),
        dict(kind="erlang", shape=1.5, rate=1.0),
        dict(kind="erlang", shape=0, rate=1.0),
        dict(kind="gamma", shape=-1.0, rate=1.0),
        dict(kind="empirical", samples=()),
        dict(kind="empirical", samples=(1.0, -2.0)),
        dict(kind="lognormal"),
    ],
)
def test_delay_validation(bad):
    with pytest.raises(ValueError):
        DelaySpec(**bad)


def test_delay_dict_round_trip():
    for d in [
        DelaySpec.deterministic(2.5),
        DelaySpec.exponential(0.5),
        DelaySpec.erlang(2, 1.0),
        DelaySpec.gamma(1.7, 3.0),
        DelaySpec.empirical([0.1, 2.0, 3.0]),
    ]:
        assert DelaySpec.from_dict(d.to_dict()) == d


def test_delay_from_dict_accepts_fractions():
    assert DelaySpec.from_dict({"kind": "exponential", "rate": "1/4"}).rate == 0.25


def test_erlang_two_ninetieth_percentile_near_four_seconds():
    d = DelaySpec.erlang(2, 1.0)
    t90 = stats.gamma(2).ppf(0.9)
    assert t90 == pytest.approx(3.89, abs=0.01)
    assert d.cdf(t90) == pytest.approx(0.9, abs=1e-12)


def test_scaled_keeps_shape():
    d = DelaySpec.gamma(2.5, 2.0).scaled(3.0)
    assert d.shape == 2.5 and d.mean() == pytest.approx(3 * 1.25)
    assert DelaySpec.deterministic(2.0).scaled(0.5).d == 1.0


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(mu_m=1 / 600, alpha=0.9, k=6, b0=10)
    with pytest.raises(ValueError):
        ModelParams(mu_m=1 / 600, alpha=0.0, k=6)
    with pytest.raises(ValueError):
        ModelParams(mu_m=1 / 600, alpha=0.9, k=0)
    p = ModelParams.from_dict({"mu_m": "1/600", "alpha": 0.9, "k": 6, "delay": {"kind": "erlang", "shape": 2, "rate": 1}})
    assert p.adversary_rate == pytest.approx(0.1 / 600)
    assert ModelParams.from_dict(p.to_dict()) == p


# -- mixed-Poisson counts ------------------------------------------------------


def test_deterministic_gives_poisson():
    p = mixed_poisson_pmf(DelaySpec.deterministic(600), 1 / 600)
    assert p[0] == pytest.approx(math.exp(-1), abs=1e-12)
    np.testing.assert_allclose(entries(p), stats.poisson.pmf(np.arange(p.last + 1), 1.0), rtol=0, atol=1e-14)


def test_exponential_gives_geometric():
    p = mixed_poisson_pmf(DelaySpec.exponential(1.0), 1.0)
    i = np.arange(p.last + 1)
    np.testing.assert_allclose(entries(p), 0.5 ** (i + 1), rtol=0, atol=1e-15)


def test_zero_rate_is_point_mass():
    p = mixed_poisson_pmf(DelaySpec.erlang(2, 1.0), 0.0)
    assert p.offset == 0 and list(p.masses) == [1.0]


def test_negative_rate_rejected():
    with pytest.raises(ValueError):
        mixed_poisson_pmf(DelaySpec.exponential(1.0), -1.0)


def _mixture_by_quadrature(shape, rate, r, i):
    """E[exp(-r t) (r t)^i / i!] against the gamma(shape, rate) density."""
    def f(t):
        return math.exp(special.xlogy(i, r * t) - r * t - special.gammaln(i + 1)
                        + shape * math.log(rate) + (shape - 1) * math.log(t) - rate * t - special.gammaln(shape))
    val, _ = integrate.quad(f, 0, np.inf, epsabs=1e-15, epsrel=1e-12, limit=200)
    return val


@pytest.mark.parametrize("shape,rate,r", [(2, 1.0, 0.1 / 600), (2, 1.0, 0.7), (3.5, 2.0, 1.3)])
def test_gamma_mixture_matches_quadrature(shape, rate, r):
    d = DelaySpec.erlang(shape, rate) if shape == int(shape) else DelaySpec.gamma(shape, rate)
    p = mixed_poisson_pmf(d, r)
    for i in range(min(p.last, 12) + 1):
        assert p[i] == pytest.approx(_mixture_by_quadrature(shape, rate, r, i), abs=1e-10)


@pytest.mark.parametrize("d", [DelaySpec.erlang(2, 1.0), DelaySpec.gamma(0.6, 0.5), DelaySpec.exponential(0.3)])
def test_closed_form_matches_quadrature_route(d):
    a = mixed_poisson_pmf(d, 0.9)
    b = quadrature_mixed_poisson(d, 0.9)
    hi = max(a.last, b.last)
    np.testing.assert_allclose(dense(a, 0, hi), dense(b, 0, hi), rtol=0, atol=1e-10)


def test_empirical_is_sample_mixture():
    d = DelaySpec.empirical([0.0, 1.0, 3.0])
    p = mixed_poisson_pmf(d, 2.0)
    i = np.arange(p.last + 1)
    ref = (stats.poisson.pmf(i, 0.0) + stats.poisson.pmf(i, 2.0) + stats.poisson.pmf(i, 6.0)) / 3
    np.testing.assert_allclose(entries(p), ref, rtol=0, atol=1e-14)


def test_c_alpha_examples():
    p = c_alpha_pmf(0.9)
    assert p[0] == pytest.approx(0.9) and p[1] == pytest.approx(0.09) and p[2] == pytest.approx(0.009)
    assert list(c_alpha_pmf(1.0).masses) == [1.0]
    assert mean(c_alpha_pmf(0.75)) == pytest.approx(1 / 3, abs=1e-12)
    with pytest.raises(ValueError):
        c_alpha_pmf(0.0)
    with pytest.raises(ValueError):
        c_alpha_pmf(1.1)


def test_c_b0_examples():
    base = ModelParams(mu_m=1 / 600, alpha=0.9, k=6)
    assert list(c_b0_pmf(base).masses) == [1.0]
    sym = base.replace(b0=1, lambda_h=base.adversary_rate)
    p = c_b0_pmf(sym)
    np.testing.assert_allclose(entries(p, 10), 0.5 ** (np.arange(11) + 1), rtol=0, atol=1e-15)
    fee = base.replace(b0=100, lambda_h=1 / 5)
    assert mean(c_b0_pmf(fee)) == pytest.approx(1 / 12, abs=1e-9)


# -- max(delay, Erlang) --------------------------------------------------------


def test_max_delay_rejects_b0_zero():
    with pytest.raises(ValueError):
        max_delay_spec(DelaySpec.deterministic(1.0), 0, 1.0)


def test_max_with_zero_delay_is_erlang():
    lam, r = 0.4, 0.25
    p = mixed_poisson_pmf(max_delay_spec(DelaySpec.deterministic(0.0), 1, lam), r)
    q = mixed_poisson_pmf(DelaySpec.erlang(1, lam), r)
    hi = max(p.last, q.last)
    np.testing.assert_allclose(dense(p, 0, hi), dense(q, 0, hi), rtol=0, atol=1e-10)


def test_max_with_instant_idle_is_plain_delay():
    r, d = 0.5, 3.0
    p = mixed_poisson_pmf(max_delay_spec(DelaySpec.deterministic(d), 1, 1e9), r)
    q = mixed_poisson_pmf(DelaySpec.deterministic(d), r)
    hi = max(p.last, q.last)
    np.testing.assert_allclose(dense(p, 0, hi), dense(q, 0, hi), rtol=0, atol=1e-8)


def test_max_delay_mean_and_survival():
    m = MaxDelay(DelaySpec.exponential(1.0), 1, 1.0)
    # E[max(X, Y)] for iid Exp(1) is 1.5
    assert m.mean() == pytest.approx(1.5, abs=1e-10)
    t = np.array([0.0, 0.5, 2.0])
    np.testing.assert_allclose(m.survival(t), 1 - (1 - np.exp(-t)) ** 2, atol=1e-15)
    p = mixed_poisson_pmf(m, 2.0)
    assert mean(p) == pytest.approx(3.0, abs=1e-8)


def test_max_of_exponentials_against_monte_carlo():
    n = 10_000_000
    rng = np.random.default_rng(2024)
    t = np.maximum(rng.exponential(1.0, n), rng.exponential(1.0, n))
    counts = np.bincount(rng.poisson(t))
    p = mixed_poisson_pmf(max_delay_spec(DelaySpec.exponential(1.0), 1, 1.0), 1.0)
    for i in range(8):
        sigma = math.sqrt(p[i] * (1 - p[i]) / n)
        assert abs(counts[i] / n - p[i]) <= 3 * sigma, i


# -- properties ----------------------------------------------------------------


delays = st.one_of(
    st.floats(0.0, 50.0).map(DelaySpec.deterministic),
    st.floats(0.05, 5.0).map(DelaySpec.exponential),
    st.tuples(st.integers(1, 6), st.floats(0.1, 5.0)).map(lambda a: DelaySpec.erlang(*a)),
    st.tuples(st.floats(0.2, 6.0), st.floats(0.1, 5.0)).map(lambda a: DelaySpec.gamma(*a)),
)


@settings(max_examples=60, deadline=None)
@given(delays, st.floats(1e-4, 2.0))
def test_mean_is_rate_times_mean_delay(d, r):
    p = mixed_poisson_pmf(d, r)
    expected = r * d.mean()
    assert mean(p) == pytest.approx(expected, rel=1e-8, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(delays, st.floats(1e-3, 1.0), st.floats(1.01, 3.0))
def test_faster_arrivals_stochastically_larger(d, r, factor):
    lo, hi = mixed_poisson_pmf(d, r), mixed_poisson_pmf(d, r * factor)
    for x in range(1, max(lo.last, 2) + 1):
        assert ccdf(hi, x) >= ccdf(lo, x) - 1e-15
