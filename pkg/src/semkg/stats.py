"""Exact binomial (Clopper-Pearson) intervals and their propagation to F1."""

from __future__ import annotations

import math

from .metrics import f1_from_pr

_EPS = 1e-300


def _betacf(a: float, b: float, x: float, max_iter: int = 1000, tol: float = 1e-15) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c, d = 1.0, 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _EPS else _EPS)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _EPS else _EPS)
        c = 1.0 + aa / c
        c = c if abs(c) > _EPS else _EPS
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _EPS else _EPS)
        c = 1.0 + aa / c
        c = c if abs(c) > _EPS else _EPS
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            break
    return h


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) for a, b > 0."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0:
        return 0.0
    if x >= 1:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1) / (a + b + 2):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def beta_ppf(q: float, a: float, b: float, tol: float = 1e-12) -> float:
    """Inverse of :func:`betainc` in x, by bisection."""
    if not 0 <= q <= 1:
        raise ValueError("q must be in [0, 1]")
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if betainc(a, b, mid) < q:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def clopper_pearson(k: int, n: int, alpha: float = 0.05) -> tuple[float, float]:
    """Two-sided exact interval for a binomial proportion k/n at level 1 - alpha."""
    if n < 1 or not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n and n >= 1, got k={k}, n={n}")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    # boundary cases have closed forms; the beta quantile reduces to a power
    if k == 0:
        return 0.0, 1.0 - (alpha / 2) ** (1.0 / n)
    if k == n:
        return (alpha / 2) ** (1.0 / n), 1.0
    return beta_ppf(alpha / 2, k, n - k + 1), beta_ppf(1 - alpha / 2, k + 1, n - k)


def f1_confidence_interval(tp: int, fp: int, fn: int, alpha: float = 0.05) -> tuple[float, float]:
    """F1 bounds from the four combinations of precision and recall interval endpoints."""
    if tp + fp < 1 or tp + fn < 1:
        raise ValueError("need at least one predicted positive and one actual positive")
    p_bounds = clopper_pearson(tp, tp + fp, alpha)
    r_bounds = clopper_pearson(tp, tp + fn, alpha)
    values = [f1_from_pr(p, r) for p in p_bounds for r in r_bounds]
    return min(values), max(values)
