"""Risk, reward and trading-cost indicators for portfolio return series.

All return series are 1-D arrays in percent units (1.25 means 1.25%).
The engine-wide empirical quantile is the lower (type-1) convention:
the ceil(p*T)-th order statistic of the sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSeriesError, UndefinedRatioError

__all__ = [
    "empirical_quantile",
    "psi1_hat",
    "alpha_risk_hat",
    "psi2_hat",
    "mad_hat",
    "sharpe_hat",
    "omega_hat",
    "rachev_hat",
    "turnover",
    "wealth_path",
    "IndicatorReport",
    "compute_report",
]


def _series(r) -> np.ndarray:
    r = np.asarray(r, dtype=float).ravel()
    if r.size == 0:
        raise ValueError("empty series")
    return r


def empirical_quantile(r, p: float) -> float:
    """Lower empirical quantile: the ceil(p*T)-th order statistic."""
    r = _series(r)
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile level must be in (0, 1), got {p}")
    # ceil guarded against p*T landing a float epsilon above an integer
    k = max(1, int(math.ceil(p * r.size - 1e-9)))
    return float(np.sort(r)[k - 1])


def psi1_hat(r, psi: float) -> float:
    """Negative mean of the returns at or below the psi-quantile.

    A pessimistic reward measure: the conditional expected return with the
    most favorable (1 - psi) share of outcomes removed, sign-flipped so
    that lower values are better.
    """
    r = _series(r)
    q = empirical_quantile(r, psi)
    mask = r <= q
    return float(-r[mask].sum() / mask.sum())


def alpha_risk_hat(r, alpha: float) -> float:
    """Tail risk: psi1_hat evaluated in the left tail at level alpha."""
    return psi1_hat(r, alpha)


def psi2_hat(r, psi: float) -> float:
    """Capped positive mass over absolute negative mass.

    Numerator sums returns in [0, Q_psi]; denominator is |sum of strictly
    negative returns|. Raises UndefinedRatioError when there are no
    negative returns (callers may report infinity).
    """
    r = _series(r)
    neg_sum = r[r < 0.0].sum()
    if neg_sum == 0.0:
        raise UndefinedRatioError("psi2 undefined: no negative returns in series")
    q = empirical_quantile(r, psi)
    num = r[(r >= 0.0) & (r <= q)].sum()
    return float(num / abs(neg_sum))


def mad_hat(r) -> float:
    """Mean absolute deviation around the sample mean."""
    r = _series(r)
    return float(np.abs(r - r.mean()).mean())


def sharpe_hat(r) -> float:
    """Sample mean over sample standard deviation, zero risk-free rate."""
    r = _series(r)
    if r.size < 2:
        raise DegenerateSeriesError("sharpe needs at least 2 observations")
    sd = r.std(ddof=1)
    if sd == 0.0:
        raise DegenerateSeriesError("degenerate series: zero standard deviation")
    return float(r.mean() / sd)


def omega_hat(r) -> float:
    """Total positive mass over total negative mass."""
    r = _series(r)
    neg = np.clip(-r, 0.0, None).sum()
    if neg == 0.0:
        raise UndefinedRatioError("omega undefined: no negative returns in series")
    return float(np.clip(r, 0.0, None).sum() / neg)


def rachev_hat(r, alpha: float, psi: float) -> float:
    """Left-tail mean magnitude over the mean return beyond the psi-quantile."""
    r = _series(r)
    num = psi1_hat(r, alpha)
    upper = r[r > empirical_quantile(r, psi)]
    if upper.size == 0:
        raise UndefinedRatioError("rachev undefined: empty upper tail")
    denom = upper.mean()
    if denom == 0.0:
        raise UndefinedRatioError("rachev undefined: zero upper-tail mean")
    return float(num / denom)


def turnover(weights) -> float:
    """Average absolute weight change per rebalance date.

    ``weights`` is an (N, n) array of per-rebalance weight vectors; the sum
    of the N - 1 consecutive variations is divided by N, the number of
    out-of-sample dates.
    """
    w = np.atleast_2d(np.asarray(weights, dtype=float))
    if w.shape[0] < 2:
        raise ValueError("turnover needs at least 2 rebalance dates")
    return float(np.abs(np.diff(w, axis=0)).sum() / w.shape[0])


def wealth_path(r, initial: float = 100.0) -> np.ndarray:
    """Compound percent returns into a wealth series starting at ``initial``."""
    r = np.asarray(r, dtype=float).ravel()
    return np.concatenate([[initial], initial * np.cumprod(1.0 + r / 100.0)])


# Fixed serialization names; the first twelve are the indicator columns.
REPORT_FIELDS = (
    "mean",
    "std",
    "mad",
    "var10",
    "alpha_risk10",
    "psi1_90",
    "psi2_90",
    "sharpe",
    "omega",
    "rachev",
    "turnover",
    "final_wealth",
    "alpha",
    "psi",
)


@dataclass
class IndicatorReport:
    """The full indicator battery for one portfolio return series.

    Percent-unit fields: mean, std, mad, var_alpha, alpha_risk, psi1.
    ``turnover`` is NaN when no weight path was supplied. Ratio indicators
    that hit an empty denominator are reported as infinity; a zero-variance
    series yields a NaN sharpe.
    """

    mean: float
    std: float
    mad: float
    var_alpha: float
    alpha_risk: float
    psi1: float
    psi2: float
    sharpe: float
    omega: float
    rachev: float
    turnover: float
    final_wealth: float
    alpha: float
    psi: float

    def as_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std": self.std,
            "mad": self.mad,
            "var10": self.var_alpha,
            "alpha_risk10": self.alpha_risk,
            "psi1_90": self.psi1,
            "psi2_90": self.psi2,
            "sharpe": self.sharpe,
            "omega": self.omega,
            "rachev": self.rachev,
            "turnover": self.turnover,
            "final_wealth": self.final_wealth,
            "alpha": self.alpha,
            "psi": self.psi,
        }

    def csv_row(self) -> list:
        d = self.as_dict()
        return [d[k] for k in REPORT_FIELDS]


def compute_report(r, alpha: float = 0.1, psi: float = 0.9, weights=None,
                   initial_wealth: float = 100.0) -> IndicatorReport:
    """Evaluate every indicator on a return series.

    ``weights`` is an optional (N, n) weight path aligned with ``r``; when
    given (and long enough) the turnover field is populated.
    """
    r = _series(r)
    std = float(r.std(ddof=1)) if r.size > 1 else 0.0
    try:
        sharpe = sharpe_hat(r)
    except DegenerateSeriesError:
        sharpe = math.nan
    try:
        psi2 = psi2_hat(r, psi)
    except UndefinedRatioError:
        psi2 = math.inf
    try:
        omega = omega_hat(r)
    except UndefinedRatioError:
        omega = math.inf
    try:
        rachev = rachev_hat(r, alpha, psi)
    except UndefinedRatioError:
        rachev = math.inf
    turn = math.nan
    if weights is not None and np.atleast_2d(np.asarray(weights)).shape[0] >= 2:
        turn = turnover(weights)
    return IndicatorReport(
        mean=float(r.mean()),
        std=std,
        mad=mad_hat(r),
        var_alpha=empirical_quantile(r, alpha),
        alpha_risk=alpha_risk_hat(r, alpha),
        psi1=psi1_hat(r, psi),
        psi2=psi2,
        sharpe=sharpe,
        omega=omega,
        rachev=rachev,
        turnover=turn,
        final_wealth=float(wealth_path(r, initial_wealth)[-1]),
        alpha=alpha,
        psi=psi,
    )
