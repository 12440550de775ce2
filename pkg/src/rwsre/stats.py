"""Small statistics toolkit shared by the verification pipelines."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats as sps


def ecdf(sample: np.ndarray, x) -> np.ndarray:
    s = np.sort(np.asarray(sample))
    return np.searchsorted(s, x, side="right") / len(s)


def ks_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    return float(sps.ks_2samp(a, b, method="asymp").statistic)


def ks_test(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    r = sps.ks_2samp(a, b, method="asymp")
    return float(r.statistic), float(r.pvalue)


def ks_critical(n: int, m: int, alpha: float) -> float:
    """Asymptotic two-sample KS critical value at level alpha."""
    c = math.sqrt(-0.5 * math.log(alpha / 2.0))
    return c * math.sqrt((n + m) / (n * m))


def cvm_test(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Two-sample Cramer-von Mises statistic and p-value."""
    r = sps.cramervonmises_2samp(a, b, method="asymptotic")
    return float(r.statistic), float(r.pvalue)


def wilson_ci(successes: int, trials: int, conf: float = 0.99) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 1.0
    z = sps.norm.ppf(0.5 + conf / 2.0)
    p = successes / trials
    den = 1.0 + z * z / trials
    mid = (p + z * z / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


def mean_ci(sample: np.ndarray, conf: float = 0.99) -> tuple[float, float, float]:
    """(mean, lo, hi) normal-approximation CI for the mean."""
    m = float(np.mean(sample))
    se = float(np.std(sample, ddof=1)) / math.sqrt(len(sample))
    z = sps.norm.ppf(0.5 + conf / 2.0)
    return m, m - z * se, m + z * se


def variance_ci(sample: np.ndarray, conf: float = 0.99) -> tuple[float, float, float]:
    """(var, lo, hi) CI for the variance via the delta method on the
    fourth central moment (heavy-tail tolerant, unlike the chi-square CI)."""
    x = np.asarray(sample, dtype=float)
    n = len(x)
    m = x.mean()
    v = float(x.var(ddof=1))
    mu4 = float(np.mean((x - m) ** 4))
    se = math.sqrt(max(mu4 - v * v, 0.0) / n)
    z = sps.norm.ppf(0.5 + conf / 2.0)
    return v, v - z * se, v + z * se


def hill_tail_exponent(sample: np.ndarray, frac: float = 0.05) -> float:
    """Hill estimator of the tail exponent from the top ``frac`` order stats."""
    x = np.sort(np.asarray(sample, dtype=float))
    x = x[x > 0]
    k = max(10, int(frac * len(x)))
    top = x[-k:]
    return 1.0 / float(np.mean(np.log(top / top[0])))
