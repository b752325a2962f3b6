"""Wilcoxon signed-ranks, Pearson correlation, and RT dispersion.

Implementations are self-contained: the normal CDF comes from math.erfc and
the Student-t tail from a continued-fraction regularized incomplete beta, so
the test suite can use an entirely independent second route (exact
enumeration, scipy) as the oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AllZeroDifferences, LengthMismatch, TooFewPairs, TooFewTrials, ZeroVariance


@dataclass(frozen=True)
class StatResult:
    kind: str  # "wilcoxon" | "pearson"
    statistic: float  # Z for wilcoxon, r for pearson
    p_value: float
    n: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value out of range: {self.p_value}")


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (Lentz's method)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: float) -> float:
    """P(T >= t) for Student-t with df degrees of freedom."""
    x = df / (df + t * t)
    p = 0.5 * betainc_reg(df / 2.0, 0.5, x)
    return p if t >= 0 else 1.0 - p


def _midranks(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based), ties get the mean of their rank range."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def wilcoxon_signed_ranks(a, b) -> StatResult:
    """Paired two-tailed Wilcoxon signed-ranks test, normal approximation.

    Zero differences are dropped; ties in |d| get midranks with the matching
    variance correction. W = min(W+, W-); the 0.5 continuity correction
    moves W toward its null mean, and Z carries the sign of (W+ - W-).
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise LengthMismatch(f"paired test needs equal lengths, got {a.size} and {b.size}")
    d = a - b
    d = d[d != 0.0]
    if d.size == 0:
        raise AllZeroDifferences("every paired difference is zero")
    n = d.size
    if n < 5:
        raise TooFewPairs(f"need >= 5 nonzero differences, got {n}")
    ranks = _midranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    # tie correction: subtract sum(t^3 - t)/48 over tie groups of |d|
    _, counts = np.unique(np.abs(d), return_counts=True)
    var -= float(np.sum(counts.astype(np.float64) ** 3 - counts) / 48.0)
    if var <= 0:
        raise AllZeroDifferences("rank variance is zero (all |d| tied away)")
    sigma = math.sqrt(var)
    num = min(0.0, (w - mean) + 0.5)  # correction toward the mean, never past it
    z_mag = num / sigma
    p = min(1.0, 2.0 * normal_cdf(z_mag))
    z = abs(z_mag) if w_plus > w_minus else -abs(z_mag)
    if w_plus == w_minus:
        z = 0.0
    return StatResult(kind="wilcoxon", statistic=z, p_value=p, n=n)


def wilcoxon_exact_p(a, b) -> float:
    """Exact two-tailed p by enumerating all 2^n sign assignments.

    Oracle-grade (n <= ~20). Uses the same zero-drop and midrank
    conventions as the approximate test.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    d = (a - b)[(a - b) != 0.0]
    if d.size == 0:
        raise AllZeroDifferences("every paired difference is zero")
    n = d.size
    ranks = _midranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    total = float(ranks.sum())
    w_obs = min(w_plus, total - w_plus)
    count = 0
    for mask in range(1 << n):
        wp = 0.0
        for i in range(n):
            if mask & (1 << i):
                wp += ranks[i]
        if min(wp, total - wp) <= w_obs + 1e-12:
            count += 1
    return count / (1 << n)


def pearson(x, y) -> StatResult:
    """Sample correlation with a two-tailed Student-t p-value."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise LengthMismatch(f"paired inputs needed, got {x.size} and {y.size}")
    n = x.size
    if n < 3:
        raise TooFewPairs(f"need >= 3 pairs, got {n}")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = math.sqrt(float(dx @ dx))
    sy = math.sqrt(float(dy @ dy))
    if sx == 0.0 or sy == 0.0:
        raise ZeroVariance("an input has zero variance")
    r = float(dx @ dy) / (sx * sy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        p = 0.0
    else:
        t = r * math.sqrt((n - 2) / (1.0 - r * r))
        p = 2.0 * student_t_sf(abs(t), n - 2)
    return StatResult(kind="pearson", statistic=r, p_value=min(1.0, p), n=n)


def rt_dispersion(rts) -> float:
    """Population standard deviation of one subject's reaction times."""
    rts = np.asarray(rts, dtype=np.float64).ravel()
    if rts.size < 2:
        raise TooFewTrials(f"dispersion needs >= 2 trials, got {rts.size}")
    return float(rts.std())
