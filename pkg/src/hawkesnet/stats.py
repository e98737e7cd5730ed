"""Test verdicts and regressions shared by the experiments."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special, stats as sps

from .exceptions import NonPositiveValueError, SampleTooSmallError

MIN_KS_SAMPLE = 20

_REFERENCES = {
    "exp": lambda x: -np.expm1(-np.maximum(x, 0.0)),
    "normal": special.ndtr,
}


@dataclass(frozen=True)
class TestVerdict:
    __test__ = False  # not a pytest class

    statistic: float
    pvalue: float
    n: int
    alpha: float
    passed: bool

    def to_dict(self):
        return asdict(self)


def kolmogorov_sf(x: float, terms: int = 100) -> float:
    """``P(K > x) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 x^2)``, the Kolmogorov tail."""
    if x <= 0:
        return 1.0
    k = np.arange(1, terms + 1)
    s = 2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * k**2 * x * x))
    return float(min(max(s, 0.0), 1.0))


def ks_statistic(sample, cdf) -> float:
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def ks_test(sample, reference="exp", alpha: float = 0.01) -> TestVerdict:
    """One-sample Kolmogorov-Smirnov test with the asymptotic p-value.

    ``reference`` is ``"exp"`` (unit exponential), ``"normal"`` (standard
    normal) or a CDF callable.
    """
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < MIN_KS_SAMPLE:
        raise SampleTooSmallError(f"KS test needs at least {MIN_KS_SAMPLE} points, got {x.size}")
    cdf = _REFERENCES[reference] if isinstance(reference, str) else reference
    d = ks_statistic(x, cdf)
    # scipy's kolmogorov evaluates the same series as kolmogorov_sf
    p = float(special.kolmogorov(math.sqrt(x.size) * d))
    return TestVerdict(d, p, int(x.size), alpha, p >= alpha)


def ks_2sample(first, second, alpha: float = 0.01) -> TestVerdict:
    """Two-sample KS test (asymptotic p-value), as computed by scipy."""
    a = np.asarray(first, dtype=float).ravel()
    b = np.asarray(second, dtype=float).ravel()
    if min(a.size, b.size) < MIN_KS_SAMPLE:
        raise SampleTooSmallError(f"KS test needs at least {MIN_KS_SAMPLE} points per sample")
    res = sps.ks_2samp(a, b, method="asymp")
    return TestVerdict(float(res.statistic), float(res.pvalue), int(a.size + b.size), alpha,
                       float(res.pvalue) >= alpha)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float
    ci: tuple
    level: float

    def covers(self, value: float) -> bool:
        return self.ci[0] <= value <= self.ci[1]


def loglog_slope(x, y, yerr=None, level: float = 0.95) -> SlopeFit:
    """Weighted least squares of ``log y`` on ``log x``.

    With ``yerr`` the weights are ``(y / yerr)^2`` (delta method) and the
    slope error uses these known variances.  Without it the fit is unweighted
    and the error comes from the residuals with a Student quantile.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3 or x.size != y.size:
        raise ValueError("need at least 3 paired points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise NonPositiveValueError("log-log regression needs positive values")
    lx, ly = np.log(x), np.log(y)
    if yerr is None:
        w = np.ones_like(lx)
    else:
        yerr = np.asarray(yerr, dtype=float)
        if np.any(yerr <= 0):
            raise NonPositiveValueError("standard errors must be positive")
        w = (y / yerr) ** 2
    sw = w.sum()
    mx, my = (w * lx).sum() / sw, (w * ly).sum() / sw
    sxx = (w * (lx - mx) ** 2).sum()
    slope = float((w * (lx - mx) * (ly - my)).sum() / sxx)
    intercept = float(my - slope * mx)
    if yerr is None:
        resid = ly - intercept - slope * lx
        dof = x.size - 2
        se = math.sqrt((resid**2).sum() / dof / sxx)
        q = float(sps.t.ppf(0.5 + level / 2, dof))
    else:
        se = math.sqrt(1.0 / sxx)
        q = float(sps.norm.ppf(0.5 + level / 2))
    return SlopeFit(slope, intercept, se, (slope - q * se, slope + q * se), level)


def mean_and_stderr(x, axis=0):
    x = np.asarray(x, dtype=float)
    n = x.shape[axis]
    return x.mean(axis=axis), x.std(axis=axis, ddof=1) / math.sqrt(n)


__all__ = ["SlopeFit", "TestVerdict", "kolmogorov_sf", "ks_2sample", "ks_statistic", "ks_test", "loglog_slope",
           "mean_and_stderr"]
