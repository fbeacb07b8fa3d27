"""From a return window to a full budget-constrained weight vector.

The response asset (numeraire) is regressed on the deviations between its
returns and every other asset's; the estimated coefficients are the other
assets' weights and the numeraire weight closes the budget. Penalized
strategies then zero out negligible positions, handing the freed mass back
to the numeraire so the budget still holds exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array

from .errors import ConfigError, DataError
from .indicators import psi1_hat
from .regression import DesignProblem, RegressionFit, fit_ols, fit_ols_l1, fit_qr, fit_qr_l1
from .tuning import LambdaRule, calibrate_lasso_lambda, optimal_lambda, simulate_pivot

__all__ = [
    "StrategySpec",
    "WeightVector",
    "select_numeraire",
    "deviation_design",
    "recover_weights",
    "threshold_positions",
    "resolve_lambda",
    "estimate_weights",
    "PortfolioAllocator",
    "PENALIZED_ESTIMATORS",
]

ESTIMATORS = ("OLS", "LASSO", "QR", "PQR")
PENALIZED_ESTIMATORS = ("LASSO", "PQR")
NUMERAIRE_RULES = ("lowest-psi1", "fixed", "last-column")
DEFAULT_THRESHOLD = 0.0005


@dataclass(frozen=True)
class StrategySpec:
    """Which estimator to run and how to turn its fit into weights.

    The numeraire rule defaults to the per-window lowest-psi1 pick for the
    penalized estimators (whose solution depends on the numeraire) and to
    the last column for OLS/QR (whose allocation is numeraire-invariant).
    """

    estimator: str
    theta: float | None = None
    lambda_rule: LambdaRule | None = None
    numeraire_rule: str | None = None
    numeraire_asset: int | str | None = None
    psi_level: float = 0.9
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator: unknown '{self.estimator}'")
        quantile_based = self.estimator in ("QR", "PQR")
        if quantile_based and self.theta is None:
            raise ConfigError(f"theta: required for {self.estimator}")
        if not quantile_based and self.theta is not None:
            raise ConfigError(f"theta: not allowed for {self.estimator}")
        if self.theta is not None and not 0.0 < self.theta < 1.0:
            raise ConfigError(f"theta: {self.theta} outside (0, 1)")
        if self.penalized and self.lambda_rule is None:
            raise ConfigError(f"lambda_rule: required for {self.estimator}")
        if not self.penalized and self.lambda_rule is not None:
            raise ConfigError(f"lambda_rule: not allowed for {self.estimator}")
        if not 0.0 < self.psi_level < 1.0:
            raise ConfigError(f"psi_level: {self.psi_level} outside (0, 1)")
        if self.threshold < 0:
            raise ConfigError("threshold: must be >= 0")
        if self.numeraire_rule is None:
            rule = "lowest-psi1" if self.penalized else "last-column"
            object.__setattr__(self, "numeraire_rule", rule)
        if self.numeraire_rule not in NUMERAIRE_RULES:
            raise ConfigError(f"numeraire_rule: unknown '{self.numeraire_rule}'")
        if self.numeraire_rule == "fixed" and self.numeraire_asset is None:
            raise ConfigError("numeraire_asset: required for the fixed rule")

    @property
    def penalized(self) -> bool:
        return self.estimator in PENALIZED_ESTIMATORS

    @property
    def label(self) -> str:
        if self.theta is not None:
            return f"{self.estimator}({self.theta:g})"
        return self.estimator


@dataclass
class WeightVector:
    """A full weight vector summing to one, plus its position counts."""

    weights: np.ndarray
    numeraire_index: int
    intercept: float
    active_count: int
    short_count: int
    threshold: float = DEFAULT_THRESHOLD


def _as_matrix(window) -> np.ndarray:
    values = np.asarray(getattr(window, "values", window), dtype=float)
    if values.ndim != 2:
        raise DataError("return window must be a 2-D matrix")
    return values


def _counts(weights: np.ndarray, threshold: float):
    active = int((np.abs(weights) > threshold).sum())
    short = int((weights < -threshold).sum())
    return active, short


def select_numeraire(window, psi_level: float = 0.9) -> int:
    """Index of the asset with the lowest per-asset psi1 on the window.

    Ties break toward the lowest column index.
    """
    values = _as_matrix(window)
    if values.shape[0] < 10:
        raise DataError("numeraire selection needs at least 10 rows")
    if values.shape[1] < 2:
        raise DataError("numeraire selection needs at least 2 assets")
    scores = np.array([psi1_hat(values[:, j], psi_level)
                       for j in range(values.shape[1])])
    return int(np.argmin(scores))


def deviation_design(window, k: int):
    """Response column k and covariates r_k - r_j, ascending j with k skipped."""
    values = _as_matrix(window)
    n = values.shape[1]
    if not 0 <= k < n:
        raise ValueError(f"numeraire index {k} outside [0, {n})")
    others = [j for j in range(n) if j != k]
    response = values[:, k].copy()
    covariates = response[:, None] - values[:, others]
    return response, covariates


def recover_weights(fit: RegressionFit, k: int, n: int,
                    threshold: float = DEFAULT_THRESHOLD) -> WeightVector:
    """Spread the fitted coefficients over n assets, closing the budget at k."""
    coef = np.asarray(fit.coefficients, dtype=float)
    if coef.size != n - 1:
        raise ValueError(f"expected {n - 1} coefficients, got {coef.size}")
    weights = np.empty(n)
    others = [j for j in range(n) if j != k]
    weights[others] = coef
    weights[k] = 1.0 - coef.sum()
    active, short = _counts(weights, threshold)
    return WeightVector(weights, k, float(fit.intercept), active, short, threshold)


def threshold_positions(wv: WeightVector, threshold: float | None = None) -> WeightVector:
    """Zero the negligible positions and hand their mass to the numeraire.

    The numeraire itself is never zeroed: it is the budget absorber.
    Counts are recomputed on the result.
    """
    thr = wv.threshold if threshold is None else threshold
    w = wv.weights.copy()
    mask = np.abs(w) <= thr
    mask[wv.numeraire_index] = False
    w[wv.numeraire_index] += w[mask].sum()
    w[mask] = 0.0
    active, short = _counts(w, thr)
    return WeightVector(w, wv.numeraire_index, wv.intercept, active, short, thr)


def _resolve_numeraire(spec: StrategySpec, window, assets=None) -> int:
    if spec.numeraire_rule == "last-column":
        return _as_matrix(window).shape[1] - 1
    if spec.numeraire_rule == "fixed":
        ref = spec.numeraire_asset
        if isinstance(ref, str):
            names = assets if assets is not None else getattr(window, "assets", None)
            if names is None:
                raise ConfigError(
                    f"numeraire_asset '{ref}' needs a labelled panel to resolve"
                )
            if ref not in names:
                raise ConfigError(f"numeraire_asset '{ref}' not in panel")
            return list(names).index(ref)
        return int(ref)
    return select_numeraire(window, spec.psi_level)


def resolve_lambda(spec: StrategySpec, window, covariates=None) -> float:
    """Resolve the penalty for a penalized spec on a given window.

    For the pivotal rule the statistic is simulated on the window's
    deviation covariates (built here if not supplied) and scaled by the
    window length; the calibration rule bisects on the active count.
    """
    rule = spec.lambda_rule
    if rule is None:
        return 0.0
    if rule.method == "fixed":
        return float(rule.fixed_value)
    if rule.method == "match-active-count":
        return calibrate_lasso_lambda(
            window, rule.target_active, bounds=rule.search_bounds,
            spec_template=spec,
        ).lam
    if spec.theta is None and rule.theta_set is None:
        raise ConfigError(
            "pivotal-simulation needs a quantile level; "
            "use fixed or match-active-count for LASSO"
        )
    theta = spec.theta if spec.theta is not None else rule.theta_set[0]
    theta_set = rule.theta_set if rule.theta_set is not None else (theta,)
    if covariates is None:
        k = _resolve_numeraire(spec, window)
        _, covariates = deviation_design(window, k)
    samples = simulate_pivot(covariates, theta_set, rule.n_sims, rule.rng_seed)
    T = _as_matrix(window).shape[0]
    return optimal_lambda(samples, theta, T, rule.confidence).lambda_star


def estimate_weights(spec: StrategySpec, window) -> WeightVector:
    """Run the full pipeline on one window: numeraire, design, fit, recovery.

    Thresholding is applied to penalized estimators only; unpenalized
    weights are reported raw, with the position counts still computed
    against the cutoff.
    """
    values = _as_matrix(window)
    T, n = values.shape
    if not spec.penalized and T <= n:
        raise DataError(
            f"insufficient sample for unpenalized fit (T={T} <= n={n})"
        )
    k = _resolve_numeraire(spec, window, assets=getattr(window, "assets", None))
    response, covariates = deviation_design(values, k)
    lam = resolve_lambda(spec, values, covariates) if spec.penalized else 0.0
    problem = DesignProblem(response, covariates, theta=spec.theta, lam=lam)
    if spec.estimator == "OLS":
        fit = fit_ols(problem)
    elif spec.estimator == "QR":
        fit = fit_qr(problem)
    elif spec.estimator == "LASSO":
        fit = fit_ols_l1(problem) if lam > 0 else fit_ols(problem)
    else:
        fit = fit_qr_l1(problem) if lam > 0 else fit_qr(problem)
    wv = recover_weights(fit, k, n, spec.threshold)
    if spec.penalized:
        wv = threshold_positions(wv)
    return wv


def spec_with_fixed_lambda(spec: StrategySpec, lam: float) -> StrategySpec:
    """Copy of the spec with its rule pinned to a resolved penalty value."""
    return replace(spec, lambda_rule=LambdaRule(method="fixed", fixed_value=lam))


class PortfolioAllocator(BaseEstimator):
    """sklearn-style allocation estimator: fit a return window, get weights.

    ``fit(X)`` takes a (T, n) matrix of percent returns; ``predict(X)``
    returns the portfolio return series the fitted weights produce.
    """

    def __init__(self, spec: StrategySpec | None = None):
        self.spec = spec

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=2, ensure_min_features=2)
        spec = self.spec if self.spec is not None else StrategySpec("OLS")
        wv = estimate_weights(spec, X)
        self.weights_ = wv.weights
        self.numeraire_index_ = wv.numeraire_index
        self.intercept_ = wv.intercept
        self.active_count_ = wv.active_count
        self.short_count_ = wv.short_count
        self.weight_vector_ = wv
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        X = check_array(X)
        return X @ self.weights_
