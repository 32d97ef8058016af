import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special, stats

from semkg.metrics import prf_from_counts
from semkg.stats import beta_ppf, betainc, clopper_pearson, f1_confidence_interval


def binom_tail_ge(k, n, p):
    # P(X >= k) for X ~ Bin(n, p), by direct summation
    return sum(math.comb(n, i) * p ** i * (1 - p) ** (n - i) for i in range(k, n + 1))


@pytest.mark.parametrize("a,b,x", [(1, 1, 0.3), (2.5, 7, 0.1), (5, 6, 0.5), (30, 2, 0.97), (0.5, 0.5, 0.2)])
def test_betainc_vs_scipy(a, b, x):
    assert betainc(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-12)


def test_closed_forms():
    lo, hi = clopper_pearson(0, 10, 0.05)
    assert lo == 0.0
    assert hi == 1 - 0.025 ** (1 / 10)
    assert hi == pytest.approx(0.30850, abs=1e-5)
    lo, hi = clopper_pearson(10, 10, 0.05)
    assert hi == 1.0 and lo == 0.025 ** (1 / 10)


def test_k5_n10_oracles():
    lo, hi = clopper_pearson(5, 10, 0.05)
    assert lo == pytest.approx(stats.beta.ppf(0.025, 5, 6), abs=1e-6)
    assert hi == pytest.approx(stats.beta.ppf(0.975, 6, 5), abs=1e-6)
    # defining identities: the tails at the bounds are exactly alpha/2
    assert binom_tail_ge(5, 10, lo) == pytest.approx(0.025, abs=1e-9)
    assert 1 - binom_tail_ge(6, 10, hi) == pytest.approx(0.025, abs=1e-9)


@given(st.integers(1, 60).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))),
       st.sampled_from([0.01, 0.05, 0.1, 0.3]))
def test_interval_contains_point_estimate(kn, alpha):
    k, n = kn
    lo, hi = clopper_pearson(k, n, alpha)
    assert 0 <= lo <= k / n <= hi <= 1


def test_monotone_in_alpha():
    for k, n in [(3, 10), (0, 5), (7, 7), (20, 50)]:
        w = [np.subtract(*clopper_pearson(k, n, a)[::-1]) for a in (0.01, 0.05, 0.2)]
        assert w[0] >= w[1] >= w[2]


def test_parameter_errors():
    for args in [(3, 2, 0.05), (-1, 5, 0.05), (0, 0, 0.05), (1, 5, 0), (1, 5, 1)]:
        with pytest.raises(ValueError):
            clopper_pearson(*args)
    with pytest.raises(ValueError):
        f1_confidence_interval(0, 0, 3)


def test_beta_ppf_inverse():
    for q in (0.01, 0.3, 0.9):
        x = beta_ppf(q, 3, 4)
        assert betainc(3, 4, x) == pytest.approx(q, abs=1e-9)


def test_f1_interval_examples():
    lo, hi = f1_confidence_interval(10, 0, 0)
    p_lo = clopper_pearson(10, 10)[0]
    assert hi == 1.0
    assert lo == pytest.approx(p_lo)  # F1 at (p_lo, r_lo) with p_lo == r_lo
    lo, hi = f1_confidence_interval(0, 3, 4)
    assert lo == 0.0
    a = f1_confidence_interval(6, 3, 3)
    p_b, r_b = clopper_pearson(6, 9), clopper_pearson(6, 9)
    vals = [2 * p * r / (p + r) for p in p_b for r in r_b]
    assert a == pytest.approx((min(vals), max(vals)))


def test_f1_interval_contains_point():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        tp, fp, fn = (int(x) for x in rng.integers(0, 30, size=3))
        if tp + fp < 1 or tp + fn < 1:
            continue
        lo, hi = f1_confidence_interval(tp, fp, fn)
        f1 = prf_from_counts(tp, fp, fn)[2]
        assert lo - 1e-12 <= f1 <= hi + 1e-12
