"""Welch's t-test, t-based confidence intervals and tie-aware win rates."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from srsa.core import METRICS


class InsufficientSamples(ValueError):
    pass


class ZeroVarianceBoth(ValueError):
    pass


_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _TINY else _TINY)
    h = d
    for m in range(1, 10_000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def betainc(a: float, b: float, x: float, y: float | None = None) -> float:
    """Regularized incomplete beta I_x(a, b).

    ``y`` may carry ``1 - x`` computed without cancellation by the caller.
    """
    if y is None:
        y = 1.0 - x
    if x <= 0.0:
        return 0.0
    if y <= 0.0:
        return 1.0
    log_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log(y)
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, y) / b


def t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0
    t2 = t * t
    p = betainc(df / 2.0, 0.5, df / (df + t2), t2 / (df + t2))
    return min(1.0, max(0.0, p))


def t_quantile(prob: float, df: float) -> float:
    """Inverse CDF of Student's t, by bisection on the two-sided tail."""
    if not 0.0 < prob < 1.0:
        raise ValueError("prob must be in (0, 1)")
    if prob == 0.5:
        return 0.0
    tail = 2.0 * min(prob, 1.0 - prob)
    lo, hi = 0.0, 1.0
    while t_two_sided_p(hi, df) > tail:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if t_two_sided_p(mid, df) > tail:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    q = 0.5 * (lo + hi)
    return q if prob > 0.5 else -q


@dataclass(frozen=True)
class TTestResult:
    t_stat: float
    p_value: float
    df: float
    n1: int
    n2: int
    mean1: float
    mean2: float
    var1: float
    var2: float


def welch_t(group_a: Sequence[float], group_b: Sequence[float]) -> TTestResult:
    """Unequal-variance two-sample t-test, two-tailed, Welch-Satterthwaite df."""
    n1, n2 = len(group_a), len(group_b)
    if n1 < 2 or n2 < 2:
        raise InsufficientSamples(f"need at least 2 samples per group, got {n1} and {n2}")
    # statistics.variance works in exact arithmetic for floats, so the result
    # does not drift under shifts of the data
    m1, m2 = statistics.fmean(group_a), statistics.fmean(group_b)
    v1, v2 = statistics.variance(group_a), statistics.variance(group_b)
    if v1 == 0 and v2 == 0:
        raise ZeroVarianceBoth("both groups have zero sample variance")
    se1, se2 = v1 / n1, v2 / n2
    se = se1 + se2
    t = (m1 - m2) / math.sqrt(se)
    df = se * se / (se1 * se1 / (n1 - 1) + se2 * se2 / (n2 - 1))
    return TTestResult(t, t_two_sided_p(t, df), df, n1, n2, m1, m2, v1, v2)


def mean_ci95(samples: Sequence[float]) -> tuple[float, float]:
    """Mean and half-width of the two-sided 95% interval (t quantile, no clipping)."""
    n = len(samples)
    if n < 2:
        raise InsufficientSamples(f"need at least 2 samples, got {n}")
    mean = statistics.fmean(samples)
    sd = statistics.stdev(samples)
    return mean, t_quantile(0.975, n - 1) * sd / math.sqrt(n)


@dataclass(frozen=True)
class WinRateTable:
    rates: dict[str, dict[str, float]]
    counts: dict[str, dict[str, int]] = field(default_factory=dict)
    questions: int = 0

    def rate(self, metric: str, agent: str) -> float:
        return self.rates[metric][agent]


def win_rates(
    table: Sequence[Mapping[str, Mapping[str, float]]], metrics: Sequence[str] = METRICS
) -> WinRateTable:
    """Per metric, every agent tied for the top score on a question gets one win.

    Counts are summed over questions and divided by their total, so each
    metric's rates sum to one.
    """
    if not table:
        raise ValueError("win_rates needs at least one judged question")
    agents: list[str] = []
    for row in table:
        agents += [a for a in row if a not in agents]
    counts = {m: {a: 0 for a in agents} for m in metrics}
    for row in table:
        for m in metrics:
            best = max(row[a][m] for a in row)
            for a in row:
                if row[a][m] == best:
                    counts[m][a] += 1
    rates = {m: {a: counts[m][a] / sum(counts[m].values()) for a in agents} for m in metrics}
    return WinRateTable(rates, counts, len(table))
