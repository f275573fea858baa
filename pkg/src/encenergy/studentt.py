"""Student's t distribution: CDF via the regularized incomplete beta function and its inverse."""
from __future__ import annotations

import math

from scipy.optimize import brentq

_EPS = 1e-15
_TINY = 1e-300


def _betacf(a: float, b: float, x: float, max_iter: int = 500) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf(t: float, df: float) -> float:
    if df <= 0:
        raise ValueError("df must be positive")
    t2 = t * t
    if t2 < df:
        # small |t|: work with 1 - x = t^2 / (df + t^2) to avoid cancellation
        tail = 0.5 * (1.0 - betainc_reg(0.5, 0.5 * df, t2 / (df + t2)))
    else:
        tail = 0.5 * betainc_reg(0.5 * df, 0.5, df / (df + t2))
    return 1.0 - tail if t >= 0 else tail


def t_critical(alpha: float, df: int) -> float:
    """One-sided quantile: the t with ``t_cdf(t, df) == alpha``.

    Found by bracketing and Brent root finding on :func:`t_cdf`; the absolute
    error on ``t`` is below 1e-9.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if df < 1:
        raise ValueError(f"df must be >= 1, got {df}")
    if alpha == 0.5:
        return 0.0
    if alpha < 0.5:
        return -t_critical(1.0 - alpha, df)
    hi = 1.0
    while t_cdf(hi, df) < alpha:
        hi *= 2.0
    return brentq(lambda t: t_cdf(t, df) - alpha, 0.0, hi, xtol=1e-12, maxiter=200)
