"""Descriptive statistics over the district table: correlations with the
target, empirical CDFs, and log-log power-law scaling fits."""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats as sps

from .errors import EmptyInput, InsufficientData, NonPositiveValue
from .model import INDICATOR_NAMES, DistrictVector


@dataclass(frozen=True)
class CorrelationResult:
    """Pearson correlation plus the linear fit on standardized axes.

    On standardized axes the fitted slope equals r and the intercept is 0;
    the confidence half-width covers the slope at the 95% level.
    """

    indicator: str
    n: int
    r: float
    slope: float
    intercept: float
    ci95_slope: float


@dataclass(frozen=True)
class ScalingFit:
    """Power law y = a * x^b fitted by OLS in log-log space."""

    exponent: float
    prefactor: float
    ci95_exponent: float
    r_squared: float
    n: int


@dataclass(frozen=True)
class Ecdf:
    """Right-continuous empirical CDF: value(v) = #(x <= v) / n."""

    xs: tuple[float, ...]
    ps: tuple[float, ...]

    def __call__(self, v: float) -> float:
        i = bisect_right(self.xs, v)
        return 0.0 if i == 0 else self.ps[i - 1]


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc**2).sum() * (yc**2).sum())
    if denom == 0.0:
        return 0.0
    return float((xc * yc).sum() / denom)


def correlate(
    vectors: Sequence[DistrictVector],
    target: str = "unemployment_rate",
    names: Sequence[str] = INDICATOR_NAMES,
) -> list[CorrelationResult]:
    """Correlation of each district-mean indicator with the target.

    Pairs are complete cases per indicator.  The linear fit runs on
    standardized axes, where slope = r; the 95% CI uses the t distribution
    on the slope's standard error.
    """
    results: list[CorrelationResult] = []
    for name in names:
        pairs = [
            (float(v.means[name]), float(getattr(v, target)))
            for v in vectors
            if v.means.get(name) is not None and getattr(v, target) is not None
        ]
        n = len(pairs)
        if n < 3:
            raise InsufficientData(
                f"indicator {name!r}: {n} complete districts, need >= 3"
            )
        x, y = zip(*pairs)
        r = pearson_r(x, y)
        # slope of z(y) ~ z(x) is exactly r; SE via residual variance
        se = np.sqrt(max(0.0, 1.0 - r * r) / (n - 2))
        half = float(sps.t.ppf(0.975, n - 2) * se)
        results.append(
            CorrelationResult(
                indicator=name, n=n, r=r, slope=r, intercept=0.0, ci95_slope=half
            )
        )
    return results


def ecdf(values: Sequence[float]) -> Ecdf:
    """Step-function samples of the empirical CDF of ``values``."""
    if len(values) == 0:
        raise EmptyInput("ecdf of empty sample")
    xs = sorted(float(v) for v in values)
    n = len(xs)
    uniq: list[float] = []
    ps: list[float] = []
    for i, v in enumerate(xs, start=1):
        if uniq and v == uniq[-1]:
            ps[-1] = i / n
        else:
            uniq.append(v)
            ps.append(i / n)
    return Ecdf(xs=tuple(uniq), ps=tuple(ps))


def fit_scaling(x: Sequence[float], y: Sequence[float]) -> ScalingFit:
    """OLS of ln y on ln x; exponent CI at 95% via the t distribution."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise InsufficientData("x and y must have equal length")
    if x.size < 3:
        raise InsufficientData(f"need >= 3 points, got {x.size}")
    if np.any(x <= 0.0) or np.any(y <= 0.0):
        raise NonPositiveValue("scaling fit requires strictly positive x and y")
    lx = np.log(x)
    ly = np.log(y)
    lxc = lx - lx.mean()
    sxx = float((lxc**2).sum())
    if sxx == 0.0:
        raise NonPositiveValue("all x identical; exponent undefined")
    b = float((lxc * (ly - ly.mean())).sum() / sxx)
    a = float(np.exp(ly.mean() - b * lx.mean()))
    resid = ly - (np.log(a) + b * lx)
    rss = float((resid**2).sum())
    tss = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 if tss == 0.0 else 1.0 - rss / tss
    n = x.size
    se_b = np.sqrt(rss / (n - 2) / sxx)
    half = float(sps.t.ppf(0.975, n - 2) * se_b)
    return ScalingFit(exponent=b, prefactor=a, ci95_exponent=half, r_squared=r2, n=n)
