"""Paired-sample t-test with a self-contained Student-t distribution."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError

_EPS = 1e-15
_TINY = 1e-300
_MAX_ITER = 500


def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _TINY else _TINY)
    h = d
    for m in range(1, _MAX_ITER + 1):
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
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularised incomplete beta function ``I_x(a, b)``."""
    if a <= 0 or b <= 0:
        raise InvalidInputError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise InvalidInputError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # the fraction converges fast only on this side of the mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf(t: float, df: float) -> float:
    """Student-t cumulative distribution function."""
    if df <= 0:
        raise InvalidInputError("degrees of freedom must be positive")
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    t2 = t * t
    if t2 < df:
        # near zero df / (df + t^2) rounds to 1; use the complementary form
        tail = 0.5 * (1.0 - betainc_reg(0.5, df / 2.0, t2 / (df + t2)))
    else:
        tail = 0.5 * betainc_reg(df / 2.0, 0.5, df / (df + t2))
    return 1.0 - tail if t > 0 else tail


def t_sf(t: float, df: float) -> float:
    """Upper tail ``P(T > t)``."""
    return t_cdf(-t, df)


@dataclass(frozen=True)
class PairedSample:
    subject_id: str
    truthful_mean: float
    deceptive_mean: float

    def __post_init__(self):
        if not (math.isfinite(self.truthful_mean) and math.isfinite(self.deceptive_mean)):
            raise InvalidInputError(f"non-finite mean for subject {self.subject_id!r}")


@dataclass(frozen=True)
class TTestResult:
    mean_diff: float
    t_stat: float
    df: int
    p_two_sided: float
    p_one_sided: float
    pct_following_trend: float
    n: int
    degenerate: bool = False

    def to_dict(self):
        return asdict(self)


def paired_t_test(samples: Sequence) -> TTestResult:
    """Deceptive-minus-truthful paired t-test over subjects.

    ``p_one_sided`` tests deceptive > truthful.  When every difference is the
    same nonzero value the statistic is infinite; p is reported as 0 (or 1
    for the one-sided test in the wrong direction) and ``degenerate`` is set.
    """
    samples = list(samples)
    n = len(samples)
    if n < 2:
        raise InvalidInputError("a paired t-test needs at least 2 subjects")
    d = np.array([s.deceptive_mean - s.truthful_mean for s in samples], dtype=float)
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    df = n - 1
    pct = 100.0 * float(np.count_nonzero(d > 0)) / n
    scale = max(1.0, float(np.abs(d).max()))
    if sd <= 1e-14 * scale:
        if abs(mean) <= 1e-14 * scale:
            return TTestResult(0.0, 0.0, df, 1.0, 0.5, pct, n, False)
        t = math.copysign(math.inf, mean)
        return TTestResult(mean, t, df, 0.0, 0.0 if mean > 0 else 1.0, pct, n, True)
    t = mean / (sd / math.sqrt(n))
    p_two = min(1.0, 2.0 * t_sf(abs(t), df))
    return TTestResult(mean, t, df, p_two, t_sf(t, df), pct, n, False)


def paired_samples_from_records(records: Iterable) -> list:
    """Average per-subject values by label.

    ``records`` are ``(subject_id, label, value)``; subjects lacking either
    label are skipped.  Output is sorted by subject id.
    """
    acc = {}
    for sid, label, value in records:
        acc.setdefault(sid, {"truthful": [], "deceptive": []})[label].append(float(value))
    out = []
    for sid in sorted(acc):
        t, d = acc[sid]["truthful"], acc[sid]["deceptive"]
        if t and d:
            out.append(PairedSample(sid, float(np.mean(t)), float(np.mean(d))))
    return out
