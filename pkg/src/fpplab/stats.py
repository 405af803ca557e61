"""Small statistics helpers shared by the experiment layers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import statsmodels.api as sm
from scipy import stats as sps
from statsmodels.stats.proportion import proportion_confint

CONF = 0.95


def t_halfwidth(values, conf: float = CONF) -> float:
    """Student-t half-width for the mean; inf with fewer than two values."""
    x = np.asarray(values, dtype=np.float64)
    if x.size < 2:
        return math.inf
    sd = float(np.std(x, ddof=1))
    if sd == 0.0:
        return 0.0
    return float(sps.t.ppf(0.5 + conf / 2, x.size - 1) * sd / math.sqrt(x.size))


def wilson(count: int, nobs: int, conf: float = CONF) -> tuple[float, float]:
    lo, hi = proportion_confint(count, nobs, alpha=1 - conf, method="wilson")
    return float(lo), float(hi)


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    slope_se: float
    ci_low: float
    ci_high: float
    nobs: int

    @property
    def excludes_zero(self) -> bool:
        return self.ci_low > 0 or self.ci_high < 0


def linear_fit(x, y, robust: bool = False, conf: float = CONF) -> LinearFit:
    """OLS of y on x with a t-based slope interval (HC3 errors if robust)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 2 or np.ptp(x) == 0:
        raise ValueError("need at least two distinct regressor values")
    if x.size == 2:
        # two points: exact line, interval undefined
        slope = float((y[1] - y[0]) / (x[1] - x[0]))
        return LinearFit(slope, float(y[0] - slope * x[0]), math.inf, -math.inf, math.inf, 2)
    if np.all(y == y[0]):
        return LinearFit(0.0, float(y[0]), 0.0, 0.0, 0.0, int(x.size))
    X = sm.add_constant(x, has_constant="add")
    res = sm.OLS(y, X).fit(cov_type="HC3") if robust else sm.OLS(y, X).fit()
    lo, hi = res.conf_int(alpha=1 - conf)[1]
    return LinearFit(float(res.params[1]), float(res.params[0]), float(res.bse[1]),
                     float(lo), float(hi), int(x.size))
