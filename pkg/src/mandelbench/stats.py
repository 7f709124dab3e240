"""Distribution checks, the four-way comparison tree, summaries, speedups.

The decision tree for comparing two runtime samples:

    both Shapiro-Wilk p >= 0.05 (normal)?
      yes -> Levene p >= 0.05 (equal variances)? -> Student t : Welch
      no  -> KS on median-centered samples p >= 0.05 (similar shape)?
                 -> Wilcoxon-Mann-Whitney : Mood median test

All four test statistics are implemented here from their textbook
definitions; scipy supplies only probability distributions (F, t, chi2)
and serves as the independent reference the fixture suite checks against.
A sample with zero variance cannot enter Shapiro-Wilk and is treated as
non-normal, which routes comparisons involving constants down the rank
branch.

Shapiro-Wilk follows Royston's AS R94 formulation (polynomial
approximations for the coefficients and the p-value transform), valid for
3 <= n <= 5000.  The Wilcoxon-Mann-Whitney p-value uses the exact count
distribution when both samples are small and tie-free, otherwise the
normal approximation with tie and continuity corrections.  Mood's median
test builds the 2x2 above/at-or-below table (grand-median ties count as
"at or below") and applies the Yates-corrected chi-square.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from statistics import NormalDist

import numpy as np
from scipy.special import chdtrc, fdtrc, stdtr, stdtrit

_NORMAL = NormalDist()

ALPHA = 0.05
EXACT_WMW_BELOW = 20  # exact distribution below this, normal approx above


class StatError(Exception):
    pass


class TooFewPointsError(StatError):
    pass


class ZeroVarianceError(StatError):
    pass


class Method(enum.Enum):
    STUDENT_T = "StudentT"
    WELCH = "Welch"
    WILCOXON_MANN_WHITNEY = "WilcoxonMannWhitney"
    MOOD_MEDIAN = "MoodMedian"

    @property
    def letter(self) -> str:
        """Table annotation letters, in tree order."""
        return {Method.STUDENT_T: "a", Method.WELCH: "b",
                Method.WILCOXON_MANN_WHITNEY: "c",
                Method.MOOD_MEDIAN: "d"}[self]


@dataclass(frozen=True)
class ComparisonResult:
    method: Method
    statistic: float
    p_value: float

    @property
    def significant(self) -> bool:
        return self.p_value < ALPHA


@dataclass(frozen=True)
class SampleSummary:
    n: int
    center: float
    ci95: tuple[float, float] | None
    normal: bool


@dataclass(frozen=True)
class SpeedupTriple:
    vs_baseline_same_config: float
    vs_same_method_one_thread: float
    vs_single_thread_baseline: float


def _as_array(x, min_n: int, what: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{what} must be one-dimensional")
    if arr.size < min_n:
        raise TooFewPointsError(f"{what} needs n >= {min_n}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite values")
    return arr


# -- Shapiro-Wilk (AS R94) -------------------------------------------------

def _sw_coefficients(n: int) -> np.ndarray:
    # Blom scores for the expected normal order statistics
    m = np.array([_NORMAL.inv_cdf((i - 0.375) / (n + 0.25))
                  for i in range(1, n + 1)])
    ssumm2 = 2.0 * np.sum(m[n // 2:] ** 2)
    rsn = 1.0 / math.sqrt(n)
    a = np.zeros(n)
    a_n = m[-1] / math.sqrt(ssumm2)
    a1 = (-2.706056 * rsn**5 + 4.434685 * rsn**4 - 2.071190 * rsn**3
          - 0.147981 * rsn**2 + 0.221157 * rsn + a_n)
    if n <= 5:
        fac = math.sqrt((ssumm2 - 2.0 * m[-1]**2) / (1.0 - 2.0 * a1**2))
        a[1:-1] = m[1:-1] / fac
        a[-1] = a1
        a[0] = -a1
    else:
        a_n1 = m[-2] / math.sqrt(ssumm2)
        a2 = (-3.582633 * rsn**5 + 5.682633 * rsn**4 - 1.752461 * rsn**3
              - 0.293762 * rsn**2 + 0.042981 * rsn + a_n1)
        fac = math.sqrt((ssumm2 - 2.0 * m[-1]**2 - 2.0 * m[-2]**2)
                        / (1.0 - 2.0 * a1**2 - 2.0 * a2**2))
        a[2:-2] = m[2:-2] / fac
        a[-1] = a1
        a[-2] = a2
        a[0] = -a1
        a[1] = -a2
    return a


def shapiro_wilk(sample) -> tuple[float, float]:
    """Royston's W and p for normality; 3 <= n <= 5000."""
    x = np.sort(_as_array(sample, 3, "sample"))
    n = x.size
    if n > 5000:
        raise StatError("AS R94 is validated only up to n = 5000")
    if x[0] == x[-1]:
        raise ZeroVarianceError("sample is constant")

    a = _sw_coefficients(n)
    ssq = np.sum((x - x.mean()) ** 2)
    w = float(np.sum(a * x) ** 2 / ssq)
    w = min(w, 1.0)

    if n == 3:
        stqr = math.asin(math.sqrt(0.75))
        p = (6.0 / math.pi) * (math.asin(math.sqrt(w)) - stqr)
        return w, float(min(max(p, 0.0), 1.0))
    y = math.log(1.0 - w)
    if n <= 11:
        gamma = -2.273 + 0.459 * n
        mu = 0.5440 - 0.39978 * n + 0.025054 * n**2 - 0.0006714 * n**3
        sigma = math.exp(1.3822 - 0.77857 * n + 0.062767 * n**2
                         - 0.0020322 * n**3)
        z = (-math.log(gamma - y) - mu) / sigma
    else:
        ln = math.log(n)
        mu = -1.5861 - 0.31082 * ln - 0.083751 * ln**2 + 0.0038915 * ln**3
        sigma = math.exp(-0.4803 - 0.082676 * ln + 0.0030302 * ln**2)
        z = (y - mu) / sigma
    return w, float(min(max(1.0 - _NORMAL.cdf(z), 0.0), 1.0))


# -- variance and location tests --------------------------------------------

def levene(a, b) -> tuple[float, float]:
    """Classic mean-centered Levene statistic vs F(1, na+nb-2)."""
    a = _as_array(a, 2, "a")
    b = _as_array(b, 2, "b")
    za = np.abs(a - a.mean())
    zb = np.abs(b - b.mean())
    na, nb = a.size, b.size
    zbar = (za.sum() + zb.sum()) / (na + nb)
    num = na * (za.mean() - zbar) ** 2 + nb * (zb.mean() - zbar) ** 2
    den = np.sum((za - za.mean()) ** 2) + np.sum((zb - zb.mean()) ** 2)
    if den == 0.0:
        raise ZeroVarianceError("all within-group deviations are zero")
    dfd = na + nb - 2
    stat = dfd * num / den
    return float(stat), float(fdtrc(1, dfd, stat))


def student_t(a, b) -> tuple[float, float]:
    a = _as_array(a, 2, "a")
    b = _as_array(b, 2, "b")
    na, nb = a.size, b.size
    df = na + nb - 2
    pooled = ((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1)) / df
    denom = math.sqrt(pooled * (1.0 / na + 1.0 / nb))
    if denom == 0.0:
        # two constant samples; equal means -> no difference at all
        return (0.0, 1.0) if a.mean() == b.mean() else (math.inf, 0.0)
    t = (a.mean() - b.mean()) / denom
    return float(t), float(2.0 * stdtr(df, -abs(t)))


def welch_t(a, b) -> tuple[float, float]:
    a = _as_array(a, 2, "a")
    b = _as_array(b, 2, "b")
    na, nb = a.size, b.size
    va = a.var(ddof=1) / na
    vb = b.var(ddof=1) / nb
    if va + vb == 0.0:
        return (0.0, 1.0) if a.mean() == b.mean() else (math.inf, 0.0)
    t = (a.mean() - b.mean()) / math.sqrt(va + vb)
    df = (va + vb) ** 2 / (va**2 / (na - 1) + vb**2 / (nb - 1))
    return float(t), float(2.0 * stdtr(df, -abs(t)))


def _ranks_and_ties(z: np.ndarray) -> tuple[np.ndarray, float]:
    """Midranks plus the sum of t^3 - t over tie groups."""
    order = np.argsort(z, kind="mergesort")
    ranks = np.empty(z.size)
    sz = z[order]
    tie_sum = 0.0
    i = 0
    while i < z.size:
        j = i
        while j + 1 < z.size and sz[j + 1] == sz[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        width = j - i + 1
        if width > 1:
            tie_sum += width**3 - width
        i = j + 1
    return ranks, tie_sum


@lru_cache(maxsize=None)
def _wmw_count(m: int, n: int, u: int) -> int:
    """Number of rank arrangements of (m, n) with Mann-Whitney U == u."""
    if u < 0:
        return 0
    if m == 0 or n == 0:
        return 1 if u == 0 else 0
    return _wmw_count(m - 1, n, u - n) + _wmw_count(m, n - 1, u)


def wilcoxon_mann_whitney(a, b) -> tuple[float, float]:
    """Two-sided U test; exact for small tie-free samples, else normal.

    The statistic reported is U of the first sample.  The p-value is
    symmetric in the arguments either way, because both branches work
    from max(U, U') internally.
    """
    a = _as_array(a, 1, "a")
    b = _as_array(b, 1, "b")
    na, nb = a.size, b.size
    z = np.concatenate([a, b])
    ranks, tie_sum = _ranks_and_ties(z)
    u1 = float(ranks[:na].sum()) - na * (na + 1) / 2.0
    u2 = na * nb - u1
    ubig = max(u1, u2)

    if min(na, nb) < EXACT_WMW_BELOW and tie_sum == 0.0:
        total = math.comb(na + nb, na)
        tail = sum(_wmw_count(na, nb, k)
                   for k in range(int(round(min(u1, u2))) + 1))
        return u1, min(2.0 * tail / total, 1.0)

    n = na + nb
    mu = na * nb / 2.0
    var = na * nb / 12.0 * (n + 1 - tie_sum / (n * (n - 1)))
    if var == 0.0:
        return u1, 1.0  # complete tie degeneracy: nothing distinguishes them
    zstat = (ubig - mu - 0.5) / math.sqrt(var)  # 0.5 = continuity correction
    return u1, float(min(2.0 * (1.0 - _NORMAL.cdf(zstat)), 1.0))


def mood_median(a, b) -> tuple[float, float]:
    """Mood's test: 2x2 above/at-or-below grand median, Yates chi-square."""
    a = _as_array(a, 1, "a")
    b = _as_array(b, 1, "b")
    grand = float(np.median(np.concatenate([a, b])))
    above_a = int(np.sum(a > grand))
    above_b = int(np.sum(b > grand))
    table = np.array([[above_a, above_b],
                      [a.size - above_a, b.size - above_b]], dtype=np.float64)
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    if (rows == 0).any():
        # every value equals the grand median; the table is degenerate
        return 0.0, 1.0
    expected = np.outer(rows, cols) / table.sum()
    adjusted = np.maximum(np.abs(table - expected) - 0.5, 0.0)
    stat = float(np.sum(adjusted**2 / expected))
    return stat, float(chdtrc(1, stat))


def ks_similarity(a, b) -> tuple[float, float]:
    """Two-sample KS on the raw values; asymptotic two-sided p.

    Used only as the shape gate of the decision tree.  The p-value uses
    the Kolmogorov distribution with Stephens' small-sample effective-n
    correction, and the callers center each sample on its median first so
    pure location shifts do not register as shape differences.
    """
    a = np.sort(_as_array(a, 1, "a"))
    b = np.sort(_as_array(b, 1, "b"))
    everything = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, everything, side="right") / a.size
    cdf_b = np.searchsorted(b, everything, side="right") / b.size
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    en = math.sqrt(a.size * b.size / (a.size + b.size))
    t = (en + 0.12 + 0.11 / en) * d
    if t < 1e-8:  # identical CDFs; the alternating series needs t > 0
        return d, 1.0
    total = 0.0
    for k in range(1, 101):
        term = 2.0 * (-1.0) ** (k - 1) * math.exp(-2.0 * k * k * t * t)
        total += term
        if abs(term) < 1e-16:
            break
    return d, float(min(max(total, 0.0), 1.0))


# -- the decision tree -------------------------------------------------------

def _is_normal(sample) -> bool:
    try:
        _, p = shapiro_wilk(sample)
    except ZeroVarianceError:
        return False  # a constant sample is certainly not Gaussian
    return p >= ALPHA


def compare_samples(a, b) -> ComparisonResult:
    """Route two samples through the tree and run the chosen test."""
    a = _as_array(a, 3, "a")
    b = _as_array(b, 3, "b")
    if _is_normal(a) and _is_normal(b):
        _, p_var = levene(a, b)
        if p_var >= ALPHA:
            stat, p = student_t(a, b)
            return ComparisonResult(Method.STUDENT_T, stat, p)
        stat, p = welch_t(a, b)
        return ComparisonResult(Method.WELCH, stat, p)
    _, p_shape = ks_similarity(a - np.median(a), b - np.median(b))
    if p_shape >= ALPHA:
        stat, p = wilcoxon_mann_whitney(a, b)
        return ComparisonResult(Method.WILCOXON_MANN_WHITNEY, stat, p)
    stat, p = mood_median(a, b)
    return ComparisonResult(Method.MOOD_MEDIAN, stat, p)


def summarize(sample) -> SampleSummary:
    """Center (mean if normal else median) and t-based 95% CI if normal."""
    x = _as_array(sample, 3, "sample")
    if _is_normal(x):
        mean = float(x.mean())
        se = float(x.std(ddof=1) / math.sqrt(x.size))
        tq = float(stdtrit(x.size - 1, 0.975))  # two-sided 95% -> 0.975
        return SampleSummary(x.size, mean, (mean - tq * se, mean + tq * se),
                             True)
    return SampleSummary(x.size, float(np.median(x)), None, False)


def speedup_triple(subject: SampleSummary,
                   baseline_same_config: SampleSummary,
                   same_method_one_thread: SampleSummary,
                   single_thread_baseline: SampleSummary) -> SpeedupTriple:
    """The three reference/subject center ratios of the result tables."""
    for name, summ in (("subject", subject),
                       ("baseline_same_config", baseline_same_config),
                       ("same_method_one_thread", same_method_one_thread),
                       ("single_thread_baseline", single_thread_baseline)):
        if summ.center <= 0:
            raise ValueError(f"{name} center must be positive")
    return SpeedupTriple(
        vs_baseline_same_config=baseline_same_config.center / subject.center,
        vs_same_method_one_thread=(same_method_one_thread.center
                                   / subject.center),
        vs_single_thread_baseline=(single_thread_baseline.center
                                   / subject.center))
