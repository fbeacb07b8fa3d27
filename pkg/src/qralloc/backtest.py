"""Rolling-window estimation with in-sample and out-of-sample assessment.

Windows of fixed size slide forward one day at a time: the weights fitted
on days [t-ws+1, t] price the same window in-sample and day t+1
out-of-sample, so a T-day panel yields T-ws out-of-sample returns. Each
out-of-sample return splits exactly into the window's estimated intercept
plus a residual, which is what the decomposition diagnostics track.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, replace

import numpy as np

from ._io import write_csv
from .allocation import StrategySpec, estimate_weights, resolve_lambda, spec_with_fixed_lambda
from .errors import ConfigError, DataError, EngineError
from .indicators import IndicatorReport, REPORT_FIELDS, compute_report
from .panel import ReturnPanel

__all__ = [
    "WindowPlan",
    "WeightPath",
    "BacktestResult",
    "DecompositionStats",
    "make_windows",
    "run_backtest",
    "split_subperiods",
    "decomposition_stats",
    "write_backtest_files",
]


@dataclass(frozen=True)
class WindowPlan:
    """Rolling schedule: which row each estimation window ends on."""

    ws: int
    n_periods: int
    stride: int = 1

    @property
    def end_indices(self) -> np.ndarray:
        # 0-based rows ws-1 .. T-2; the day after each still exists
        return np.arange(self.ws - 1, self.n_periods - 1, self.stride)

    @property
    def n_windows(self) -> int:
        return len(self.end_indices)


def make_windows(T: int, ws: int, stride: int = 1) -> WindowPlan:
    """Plan for windows [t-ws+1, t], t = ws .. T-1 in 1-based day counts."""
    if ws < 2:
        raise ConfigError(f"ws: window size must be >= 2, got {ws}")
    if ws >= T:
        raise ConfigError(f"ws: window size {ws} must be smaller than T={T}")
    if stride < 1:
        raise ConfigError(f"stride: must be >= 1, got {stride}")
    return WindowPlan(ws=ws, n_periods=T, stride=stride)


@dataclass(frozen=True)
class WeightPath:
    """Per-rebalance-date full weight vectors (budget recovered, thresholded)."""

    dates: tuple
    assets: tuple
    values: np.ndarray


@dataclass
class BacktestResult:
    spec: StrategySpec
    plan: WindowPlan
    assets: tuple
    weight_path: WeightPath
    oos_dates: tuple
    oos_returns: np.ndarray
    insample_reports: list
    intercept_path: np.ndarray
    residual_path: np.ndarray
    numeraire_path: np.ndarray
    active_path: np.ndarray
    short_path: np.ndarray
    resolved_lambda: float | None
    alpha: float
    psi: float


def run_backtest(spec: StrategySpec, panel: ReturnPanel, plan: WindowPlan,
                 alpha: float = 0.1, psi: float = 0.9,
                 fix_numeraire: bool = False) -> BacktestResult:
    """Estimate weights per window and collect the full result set.

    Penalized strategies resolve their penalty once on the full panel and
    hold it fixed across windows, unless the rule asks for a per-window
    recompute. ``fix_numeraire`` freezes the numeraire chosen on the first
    window for the rest of the run.
    """
    values = panel.values
    T, n = values.shape
    if plan.n_periods != T:
        raise ConfigError(f"plan is for T={plan.n_periods}, panel has T={T}")

    run_spec = spec
    resolved_lambda = None
    if spec.penalized:
        rule = spec.lambda_rule
        if rule.method == "fixed":
            resolved_lambda = float(rule.fixed_value)
        elif not rule.recompute_per_window:
            resolved_lambda = resolve_lambda(spec, panel)
            run_spec = spec_with_fixed_lambda(spec, resolved_lambda)

    ws = plan.ws
    ends = plan.end_indices
    first = True
    weights = np.empty((len(ends), n))
    oos = np.empty(len(ends))
    intercepts = np.empty(len(ends))
    residuals = np.empty(len(ends))
    numeraires = np.empty(len(ends), dtype=int)
    actives = np.empty(len(ends), dtype=int)
    shorts = np.empty(len(ends), dtype=int)
    reports = []
    col_index = np.arange(n)
    for i, e in enumerate(ends):
        sub = values[e - ws + 1 : e + 1]
        try:
            wv = estimate_weights(run_spec, sub)
        except EngineError as err:
            raise type(err)(f"window ending {panel.dates[e]}: {err}") from err
        if fix_numeraire and first:
            run_spec = replace(run_spec, numeraire_rule="fixed",
                               numeraire_asset=wv.numeraire_index)
            first = False
        w = wv.weights
        weights[i] = w
        reports.append(compute_report(sub @ w, alpha, psi))
        nxt = values[e + 1]
        oos[i] = nxt @ w
        k = wv.numeraire_index
        others = col_index != k
        # out-of-sample residual from the fitted coefficients (deviations form)
        residuals[i] = nxt[k] - wv.intercept - w[others] @ (nxt[k] - nxt[others])
        intercepts[i] = wv.intercept
        numeraires[i] = k
        actives[i] = wv.active_count
        shorts[i] = wv.short_count

    weight_dates = tuple(panel.dates[e] for e in ends)
    oos_dates = tuple(panel.dates[e + 1] for e in ends)
    return BacktestResult(
        spec=spec,
        plan=plan,
        assets=panel.assets,
        weight_path=WeightPath(weight_dates, panel.assets, weights),
        oos_dates=oos_dates,
        oos_returns=oos,
        insample_reports=reports,
        intercept_path=intercepts,
        residual_path=residuals,
        numeraire_path=numeraires,
        active_path=actives,
        short_path=shorts,
        resolved_lambda=resolved_lambda,
        alpha=alpha,
        psi=psi,
    )


def split_subperiods(result: BacktestResult, split_date: dt.date):
    """Independent indicator reports on the dates up to the split and after.

    Turnover is computed on each sub-period's own weight path, so its
    normalization follows the sub-period length.
    """
    dates = np.array(result.oos_dates)
    first = dates <= split_date
    if not first.any() or first.all():
        raise DataError(f"split at {split_date} leaves an empty sub-period")
    out = []
    for mask in (first, ~first):
        out.append(compute_report(
            result.oos_returns[mask], result.alpha, result.psi,
            weights=result.weight_path.values[mask],
        ))
    return tuple(out)


@dataclass(frozen=True)
class DecompositionStats:
    """Dispersion of the intercept and residual components across windows."""

    intercept_mean: float
    intercept_std: float
    residual_mean: float
    residual_std: float


def decomposition_stats(result: BacktestResult) -> DecompositionStats:
    return DecompositionStats(
        intercept_mean=float(result.intercept_path.mean()),
        intercept_std=float(result.intercept_path.std(ddof=1)),
        residual_mean=float(result.residual_path.mean()),
        residual_std=float(result.residual_path.std(ddof=1)),
    )


def write_backtest_files(result: BacktestResult, outdir) -> None:
    """Emit the per-run artifact files into ``outdir``."""
    from pathlib import Path

    outdir = Path(outdir)
    write_csv(
        outdir / "oos_returns.csv",
        ["date", "return"],
        zip((d.isoformat() for d in result.oos_dates), result.oos_returns),
    )
    wp = result.weight_path
    write_csv(
        outdir / "weights.csv",
        ["date", "asset", "weight"],
        (
            (d.isoformat(), a, w)
            for d, row in zip(wp.dates, wp.values)
            for a, w in zip(wp.assets, row)
        ),
    )
    write_csv(
        outdir / "weights_summary.csv",
        ["date", "active", "short", "intercept", "numeraire"],
        (
            (d.isoformat(), int(a), int(s), x, wp.assets[k])
            for d, a, s, x, k in zip(
                wp.dates, result.active_path, result.short_path,
                result.intercept_path, result.numeraire_path,
            )
        ),
    )
    write_csv(
        outdir / "insample_distributions.csv",
        ["window_end_date", *REPORT_FIELDS],
        (
            (d.isoformat(), *rep.csv_row())
            for d, rep in zip(wp.dates, result.insample_reports)
        ),
    )
    write_csv(
        outdir / "decomposition.csv",
        ["date", "intercept", "residual", "oos_return"],
        zip(
            (d.isoformat() for d in result.oos_dates),
            result.intercept_path, result.residual_path, result.oos_returns,
        ),
    )
