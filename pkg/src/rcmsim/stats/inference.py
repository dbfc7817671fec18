"""Descriptive statistics and the hypothesis tests used in the analysis.

Two-sided p-values throughout. Rank tests use mid-ranks for ties.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from itertools import combinations
from typing import NamedTuple

import numpy as np

from .special import STD_NORMAL, f_sf, normal_sf_two_sided, t_sf_two_sided

WILCOXON_EXACT_MAX_N = 20
MANN_WHITNEY_EXACT_MAX_N = 12
SW_MIN_N, SW_MAX_N = 3, 50


@dataclass(frozen=True)
class TestResult:
    name: str
    statistic: float
    p_value: float
    df: tuple | float | None = None
    exact: bool = False
    degenerate: bool = False
    n: int | None = None

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        object.__setattr__(self, "statistic", float(self.statistic))
        object.__setattr__(self, "p_value", float(self.p_value))
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(self.df, tuple):
            d["df"] = list(self.df)
        if not math.isfinite(self.statistic):
            d["statistic"] = "inf" if self.statistic > 0 else "-inf"
        return d


def _finite_1d(values, what="sample") -> np.ndarray:
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise ValueError(f"{what} is empty")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{what} contains non-finite values")
    return x


def describe(values) -> dict:
    """n, mean, sd (n-1; None when n < 2), median, type-7 quartiles, min, max."""
    x = _finite_1d(values)
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    return {
        "n": int(x.size),
        "mean": float(np.mean(x)),
        "sd": float(np.std(x, ddof=1)) if x.size >= 2 else None,
        "median": float(med),
        "q1": float(q1),
        "q3": float(q3),
        "min": float(np.min(x)),
        "max": float(np.max(x)),
    }


def midranks(values) -> tuple:
    """Mid-ranks (1-based) and the list of tie-group sizes."""
    x = np.asarray(values, dtype=float)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(x.size)
    ties = []
    sx = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        if j > i:
            ties.append(j - i + 1)
        i = j + 1
    return ranks, ties


# ---------------------------------------------------------------- t test

def paired_t_test(a, b) -> TestResult:
    """Two-tailed paired t on the differences ``a - b``."""
    a = _finite_1d(a, "a")
    b = _finite_1d(b, "b")
    if a.size != b.size:
        raise ValueError(f"paired samples differ in length ({a.size} vs {b.size})")
    if a.size < 2:
        raise ValueError("paired t-test needs at least 2 pairs")
    d = a - b
    n = d.size
    mean = float(np.mean(d))
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return TestResult("paired_t", 0.0, 1.0, n - 1, degenerate=True, n=n)
        return TestResult("paired_t", math.copysign(math.inf, mean), 0.0, n - 1,
                          degenerate=True, n=n)
    t = mean / (sd / math.sqrt(n))
    return TestResult("paired_t", t, t_sf_two_sided(t, n - 1), n - 1, n=n)


# ---------------------------------------------------------------- Wilcoxon

def _signed_rank_counts(doubled_ranks) -> np.ndarray:
    """Number of sign patterns giving each doubled W+ value (0 .. sum)."""
    total = int(sum(doubled_ranks))
    counts = np.zeros(total + 1, dtype=float)
    counts[0] = 1.0
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:total + 1 - r]
        counts = counts + shifted
    return counts


def wilcoxon_signed_rank(a, b=None, method: str = "auto") -> TestResult:
    """Signed-rank test on ``a - b`` (or on ``a`` alone).

    Zero differences are dropped. ``method``: "exact" enumerates the sign
    distribution of the mid-ranks, "normal" uses the tie-corrected normal
    approximation with continuity correction, "auto" picks exact for n <= 20.
    The statistic is W+, the rank sum of the positive differences.
    """
    d = _finite_1d(a, "a")
    if b is not None:
        bb = _finite_1d(b, "b")
        if bb.size != d.size:
            raise ValueError(f"paired samples differ in length ({d.size} vs {bb.size})")
        d = d - bb
    d = d[d != 0.0]
    if d.size == 0:
        raise ValueError("all differences are zero")
    n = d.size
    if n < 5:
        raise ValueError(f"signed-rank test needs at least 5 non-zero differences, got {n}")
    ranks, ties = midranks(np.abs(d))
    w_plus = float(np.sum(ranks[d > 0]))
    if method == "auto":
        method = "exact" if n <= WILCOXON_EXACT_MAX_N else "normal"
    if method == "exact":
        doubled = np.rint(2 * ranks).astype(int)
        counts = _signed_rank_counts(doubled)
        w2 = int(round(2 * w_plus))
        total = counts.sum()
        lower = counts[:w2 + 1].sum() / total
        upper = counts[w2:].sum() / total
        p = min(1.0, 2.0 * min(lower, upper))
        return TestResult("wilcoxon_signed_rank", w_plus, p, exact=True, n=n)
    if method != "normal":
        raise ValueError(f"unknown method {method!r}")
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - sum(t ** 3 - t for t in ties) / 48.0
    diff = w_plus - mean
    if diff == 0.0:
        return TestResult("wilcoxon_signed_rank", w_plus, 1.0, n=n)
    z = (abs(diff) - 0.5) / math.sqrt(var)
    return TestResult("wilcoxon_signed_rank", w_plus, normal_sf_two_sided(max(z, 0.0)), n=n)


# ---------------------------------------------------------------- Mann-Whitney

def mann_whitney_u(x, y, method: str = "auto") -> TestResult:
    """Rank-sum test; the statistic is U of ``x`` (pairs with x > y, ties count 1/2).

    Exact permutation distribution of the mid-rank sum when n1 + n2 <= 12,
    otherwise tie-corrected normal approximation with continuity correction.
    """
    x = _finite_1d(x, "x")
    y = _finite_1d(y, "y")
    n1, n2 = x.size, y.size
    if n1 < 3 or n2 < 3:
        raise ValueError("rank-sum test needs at least 3 values per group")
    pooled = np.concatenate([x, y])
    ranks, ties = midranks(pooled)
    u = float(np.sum(ranks[:n1]) - n1 * (n1 + 1) / 2.0)
    N = n1 + n2
    mu = n1 * n2 / 2.0
    if method == "auto":
        method = "exact" if N <= MANN_WHITNEY_EXACT_MAX_N else "normal"
    if method == "exact":
        doubled = np.rint(2 * ranks).astype(int)
        target = int(round(2 * (u + n1 * (n1 + 1) / 2.0)))
        sums = np.array([doubled[list(c)].sum() for c in combinations(range(N), n1)])
        lower = np.mean(sums <= target)
        upper = np.mean(sums >= target)
        return TestResult("mann_whitney_u", u, min(1.0, 2.0 * min(lower, upper)), exact=True,
                          n=N)
    if method != "normal":
        raise ValueError(f"unknown method {method!r}")
    var = n1 * n2 / 12.0 * ((N + 1) - sum(t ** 3 - t for t in ties) / (N * (N - 1)))
    if var <= 0.0 or u == mu:
        return TestResult("mann_whitney_u", u, 1.0, degenerate=var <= 0.0, n=N)
    z = (abs(u - mu) - 0.5) / math.sqrt(var)
    return TestResult("mann_whitney_u", u, normal_sf_two_sided(max(z, 0.0)), n=N)


# ---------------------------------------------------------------- Shapiro-Wilk

_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def _poly(c, x):
    out = 0.0
    for coef in reversed(c):
        out = out * x + coef
    return out


def shapiro_wilk_coefficients(n: int) -> np.ndarray:
    """Royston's approximate weights a_1..a_{n//2} (largest first, positive)."""
    if n == 3:
        return np.array([math.sqrt(0.5)])
    half = n // 2
    m = np.array([STD_NORMAL.inv_cdf((i - 0.375) / (n + 0.25)) for i in range(1, half + 1)])
    summ2 = 2.0 * float(m @ m)
    ssumm2 = math.sqrt(summ2)
    rsn = 1.0 / math.sqrt(n)
    a = np.empty(half)
    a[0] = _poly(_C1, rsn) - m[0] / ssumm2
    if n > 5:
        a[1] = -m[1] / ssumm2 + _poly(_C2, rsn)
        fac = math.sqrt((summ2 - 2 * m[0] ** 2 - 2 * m[1] ** 2) / (1 - 2 * a[0] ** 2 - 2 * a[1] ** 2))
        start = 2
    else:
        fac = math.sqrt((summ2 - 2 * m[0] ** 2) / (1 - 2 * a[0] ** 2))
        start = 1
    a[start:] = -m[start:] / fac
    return a


def shapiro_wilk(values) -> TestResult:
    """W statistic and p-value by Royston's AS R94 approximation, 3 <= n <= 50."""
    x = np.sort(_finite_1d(values))
    n = x.size
    if not SW_MIN_N <= n <= SW_MAX_N:
        raise ValueError(f"Shapiro-Wilk implemented for {SW_MIN_N} <= n <= {SW_MAX_N}, got {n}")
    ss = float(np.sum((x - x.mean()) ** 2))
    if ss == 0.0 or x[-1] - x[0] <= 1e-12 * max(1.0, abs(x[0])):
        raise ValueError("Shapiro-Wilk undefined for a sample with zero variance")
    a = shapiro_wilk_coefficients(n)
    half = a.size
    num = float(a @ (x[::-1][:half] - x[:half]))
    w = min(1.0, num * num / ss)
    if n == 3:
        p = (6.0 / math.pi) * (math.asin(math.sqrt(w)) - math.pi / 3.0)
        return TestResult("shapiro_wilk", w, min(1.0, max(0.0, p)), exact=True, n=n)
    w1 = math.log1p(-w) if w < 1.0 else -math.inf
    if n <= 11:
        gamma = _poly(_G, n)
        if w1 >= gamma:
            return TestResult("shapiro_wilk", w, 0.0, n=n)
        y = -math.log(gamma - w1)
        mu = _poly(_C3, n)
        s = math.exp(_poly(_C4, n))
    else:
        ln = math.log(n)
        y = w1
        mu = _poly(_C5, ln)
        s = math.exp(_poly(_C6, ln))
    if math.isinf(y):
        return TestResult("shapiro_wilk", w, 1.0, n=n)
    p = 1.0 - STD_NORMAL.cdf((y - mu) / s)
    return TestResult("shapiro_wilk", w, min(1.0, max(0.0, p)), n=n)


# ---------------------------------------------------------------- two-way ANOVA

def _rss(y, X):
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ beta
    return float(r @ r), int(np.linalg.matrix_rank(X))


class AnovaTable(NamedTuple):
    effects: dict  # effect name -> TestResult
    sum_sq: dict  # effect name (and "error") -> sum of squares
    df_error: int


def two_way_anova(values, factor_a, factor_b, names=("A", "B")) -> AnovaTable:
    """Sequential (Type I) two-way ANOVA with interaction.

    Sums of squares are the drops in residual sum of squares as A, then B,
    then A x B enter a least-squares fit; on balanced data they equal the
    classical cell-mean formulas. Effects are keyed "A", "B", "AxB" (or
    the given names).
    """
    y = _finite_1d(values)
    fa = np.asarray(factor_a)
    fb = np.asarray(factor_b)
    if not (fa.shape == fb.shape == y.shape):
        raise ValueError("values and factors must have the same length")
    la = sorted(set(fa.tolist()))
    lb = sorted(set(fb.tolist()))
    if len(la) < 2 or len(lb) < 2:
        raise ValueError("each factor needs at least two levels")
    for i in la:
        for j in lb:
            if not np.any((fa == i) & (fb == j)):
                raise ValueError(f"empty cell ({i}, {j})")
    N = y.size
    one = np.ones((N, 1))
    A = np.column_stack([(fa == v).astype(float) for v in la[1:]])
    B = np.column_stack([(fb == v).astype(float) for v in lb[1:]])
    AB = np.column_stack([A[:, i] * B[:, j] for i in range(A.shape[1]) for j in range(B.shape[1])])
    rss0, r0 = _rss(y, one)
    rss_a, ra = _rss(y, np.hstack([one, A]))
    rss_ab, rab = _rss(y, np.hstack([one, A, B]))
    rss_f, rf = _rss(y, np.hstack([one, A, B, AB]))
    df_e = N - rf
    if df_e < 1:
        raise ValueError("no residual degrees of freedom; need replicate observations per cell")
    # sums of squares below round-off of the raw data are zero
    tol = 1e-13 * float(y @ y)
    clip = lambda v: v if v > tol else 0.0
    rss_f = clip(rss_f)
    ss = {names[0]: (clip(rss0 - rss_a), ra - r0),
          names[1]: (clip(rss_a - rss_ab), rab - ra),
          f"{names[0]}x{names[1]}": (clip(rss_ab - rss_f), rf - rab)}
    ms_e = rss_f / df_e
    out = {}
    for key, (s, df) in ss.items():
        if ms_e == 0.0:
            f, p, deg = (0.0, 1.0, True) if s == 0.0 else (math.inf, 0.0, True)
        else:
            f = (s / df) / ms_e
            p, deg = f_sf(f, df, df_e), False
        out[key] = TestResult(f"anova_{key}", f, p, (float(df), float(df_e)), degenerate=deg, n=N)
    return AnovaTable(out, {k: v[0] for k, v in ss.items()} | {"error": rss_f}, df_e)
