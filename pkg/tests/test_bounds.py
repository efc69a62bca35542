import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import zero_delay_attack_probability
from seclat.bounds import (
    compute_bounds,
    confirmation_pmf_lower,
    confirmation_pmf_upper,
    mempool_sanity,
    violation_lower,
    violation_upper,
)
from seclat.delays import DelaySpec, ModelParams
from seclat.errors import StabilityViolation
from seclat.pmf import ccdf, dense, mean

BTC = ModelParams(mu_m=1 / 600, alpha=0.9, k=6, delay=DelaySpec.erlang(2, 1.0))
FEE = BTC.replace(b0=100, lambda_h=0.2, b=4000)


def test_no_adversary_no_violation():
    for k in (1, 3, 10):
        p = ModelParams(mu_m=1 / 600, alpha=1.0, k=k)
        assert violation_upper(p).value == 0.0
        assert violation_lower(p).value == 0.0


def test_reference_values():
    rep = compute_bounds(BTC)
    assert rep.upper == pytest.approx(0.00115, rel=0.02)
    assert rep.lower == pytest.approx(0.00108, rel=0.02)


def test_reference_values_with_fee_threshold():
    rep = compute_bounds(FEE)
    assert rep.upper == pytest.approx(0.0075, rel=0.02)
    assert rep.lower == pytest.approx(0.0055, rel=0.02)


def test_report_matches_standalone_functions():
    rep = compute_bounds(BTC)
    assert rep.upper == violation_upper(BTC).value
    assert rep.lower == violation_lower(BTC).value
    assert 0 < rep.upper_error < 1e-12 and 0 < rep.lower_error < 1e-12


def test_report_serialises():
    rep = compute_bounds(BTC)
    d = json.loads(json.dumps(rep.to_dict(intermediates=True)))
    assert set(d["intermediates"]) >= {"Z", "Pi", "L_bar", "S_upper", "S_lower"}
    assert "intermediates" not in rep.to_dict()


def test_unstable_point_raises():
    with pytest.raises(StabilityViolation):
        compute_bounds(ModelParams(mu_m=1 / 600, alpha=0.5, k=3))
    # the idle count pushes an otherwise stable point over the edge
    with pytest.raises(StabilityViolation):
        violation_upper(ModelParams(mu_m=1 / 600, alpha=0.55, k=3, b0=200, lambda_h=0.01))


def test_zero_delay_matches_markov_chain():
    for k in (1, 2, 6):
        p = ModelParams(mu_m=1 / 600, alpha=0.9, k=k)
        ref = zero_delay_attack_probability(0.9, k)
        assert violation_upper(p).value == pytest.approx(ref, abs=1e-12)
        assert violation_lower(p).value == pytest.approx(ref, abs=1e-12)


# -- confirmation phase --------------------------------------------------------


def test_upper_confirmation_examples():
    s = confirmation_pmf_upper(ModelParams(mu_m=1 / 600, alpha=1.0, k=1))
    assert list(s.masses) == [1.0]
    d = 7.0
    p = ModelParams(mu_m=1 / 600, alpha=0.8, k=2, delay=DelaySpec.deterministic(d))
    assert mean(confirmation_pmf_upper(p)) == pytest.approx(2 * (0.2 / 0.8 + d / 600), abs=1e-9)


def test_upper_confirmation_adds_idle_counts():
    base = confirmation_pmf_upper(BTC)
    fee = confirmation_pmf_upper(FEE)
    assert mean(fee) == pytest.approx(mean(base) + 5 / 12, abs=1e-9)


def test_upper_confirmation_against_monte_carlo():
    n, k = 10_000_000, 6
    rng = np.random.default_rng(11)
    total = np.zeros(n, dtype=np.int64)
    for _ in range(k):
        total += rng.geometric(0.9, n) - 1
        total += rng.poisson(rng.gamma(2.0, 1.0, n) / 600)
    counts = np.bincount(total)
    s = confirmation_pmf_upper(BTC)
    for i in range(6):
        sigma = math.sqrt(s[i] * (1 - s[i]) / n)
        assert abs(counts[i] / n - s[i]) <= 3 * sigma, i


def test_lower_confirmation_examples():
    s = confirmation_pmf_lower(ModelParams(mu_m=1 / 600, alpha=1.0, k=4, delay=DelaySpec.erlang(2, 1.0)))
    assert list(s.masses) == [1.0]
    low, up = confirmation_pmf_lower(BTC), confirmation_pmf_upper(BTC)
    slack = low.tail_mass + up.tail_mass
    for x in range(1, up.last + 1):
        assert ccdf(low, x) <= ccdf(up, x) + slack


def test_lower_confirmation_exponential_closed_form():
    alpha, nu, mu = 0.85, 0.3, 1 / 60
    p = ModelParams(mu_m=mu, alpha=alpha, k=1, delay=DelaySpec.exponential(nu))
    q = nu / (nu + (1 - alpha) * mu)
    # sum of Geometric(alpha) and Geometric(q) failures
    n = np.arange(40)
    ref = alpha * q * ((1 - alpha) ** (n + 1) - (1 - q) ** (n + 1)) / ((1 - alpha) - (1 - q))
    s = confirmation_pmf_lower(p)
    np.testing.assert_allclose(dense(s, 0, 39), ref, rtol=0, atol=1e-12)


# -- invariants ----------------------------------------------------------------


params_strategy = st.builds(
    lambda alpha, k, d: ModelParams(mu_m=1 / 600, alpha=alpha, k=k, delay=DelaySpec.deterministic(d)),
    st.floats(0.6, 1.0),
    st.integers(1, 12),
    st.floats(0.0, 60.0),
)


@settings(max_examples=40, deadline=None)
@given(params_strategy)
def test_lower_never_exceeds_upper(p):
    rep = compute_bounds(p)
    assert 0.0 <= rep.lower <= rep.upper <= 1.0
    assert violation_lower(p).value <= violation_upper(p).value + 1e-15


def test_decreasing_in_k():
    ups = [violation_upper(BTC.replace(k=k)).value for k in range(1, 15)]
    lows = [violation_lower(BTC.replace(k=k)).value for k in range(1, 15)]
    assert all(a > b for a, b in zip(ups, ups[1:]))
    assert all(a > b for a, b in zip(lows, lows[1:]))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.6, 0.98), st.floats(0.005, 0.02), st.integers(1, 10))
def test_increasing_in_adversary_share(alpha, step, k):
    p = BTC.replace(alpha=alpha, k=k)
    q = p.replace(alpha=alpha + step)
    assert violation_upper(p).value >= violation_upper(q).value
    assert violation_lower(p).value >= violation_lower(q).value


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 100.0), st.floats(0.5, 50.0), st.integers(1, 10))
def test_increasing_in_delay(d, extra, k):
    p = ModelParams(mu_m=1 / 600, alpha=0.85, k=k, delay=DelaySpec.deterministic(d))
    q = p.replace(delay=DelaySpec.deterministic(d + extra))
    assert violation_upper(p).value <= violation_upper(q).value
    assert violation_lower(p).value <= violation_lower(q).value


@pytest.mark.parametrize("m", [0, 1, 5, 50])
def test_upper_increasing_in_b0(m):
    p = BTC.replace(b0=m, lambda_h=0.2)
    q = BTC.replace(b0=m + 1, lambda_h=0.2)
    assert violation_upper(p).value <= violation_upper(q).value


# -- mempool sanity ------------------------------------------------------------


def _messages(p):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        out = mempool_sanity(p)
    assert len(caught) == len(out)
    return out


def test_mempool_regime_of_the_example_is_fine():
    assert _messages(FEE) == []


def test_mempool_warns_on_small_threshold():
    p = BTC.replace(b0=1, lambda_h=10.0)
    msgs = _messages(p)
    assert len(msgs) == 1 and "b0/lambda_h" in msgs[0]


def test_mempool_warns_on_small_blocks():
    p = FEE.replace(b=10)
    msgs = _messages(p)
    assert len(msgs) == 1 and "b/lambda_h" in msgs[0]


def test_mempool_silent_without_threshold():
    assert _messages(BTC) == []
