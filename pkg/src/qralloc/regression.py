"""The four estimation problems behind the allocation strategies.

Least squares is solved through (minimum-norm) normal equations, quantile
regression through an exact linear program (variable splitting, HiGHS
backend), l1-penalized least squares through cyclic coordinate descent.
The intercept is never penalized. Every fit carries a certificate listing
the optimality conditions it was checked against; the certificate defines
what "solved" means independently of the solver used.

Objectives are raw sums over observations, not means, so externally
computed penalty levels plug in without rescaling.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_X_y

from .errors import NonConvergenceError, SolverError
from .indicators import empirical_quantile

__all__ = [
    "check_loss",
    "DesignProblem",
    "RegressionFit",
    "Certificate",
    "CertificateCheck",
    "fit_ols",
    "fit_qr",
    "fit_qr_l1",
    "fit_ols_l1",
    "fit_problem",
    "certify",
    "QuantileRegression",
    "LeastSquaresRegression",
]


def _check_theta(theta):
    if not 0.0 < theta < 1.0:
        raise ValueError(f"quantile level must be in (0, 1), got {theta}")


def check_loss(e, theta: float):
    """Asymmetric check loss e * (theta - 1{e < 0}); scalar or array."""
    _check_theta(theta)
    e = np.asarray(e, dtype=float)
    out = e * (theta - (e < 0.0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DesignProblem:
    """Response, deviation covariates and estimation knobs for one fit.

    ``theta`` is the quantile level, absent (None) for least squares;
    ``lam`` weights the l1 penalty on the covariate coefficients only.
    """

    response: np.ndarray
    covariates: np.ndarray
    theta: float | None = None
    lam: float = 0.0

    def __post_init__(self):
        y = np.ascontiguousarray(self.response, dtype=float).ravel()
        X = np.ascontiguousarray(self.covariates, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.size == 0:
            X = X.reshape(y.size, 0)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "covariates", X)
        if X.shape[0] != y.size:
            raise ValueError(
                f"response length {y.size} != covariate rows {X.shape[0]}"
            )
        if self.theta is not None:
            _check_theta(self.theta)
        if self.lam < 0:
            raise ValueError(f"penalty weight must be >= 0, got {self.lam}")

    @property
    def n_obs(self) -> int:
        return self.response.size

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]


@dataclass
class CertificateCheck:
    name: str
    passed: bool
    value: float
    bound: float


@dataclass
class Certificate:
    """Optimality diagnostics attached to every fit."""

    checks: list = field(default_factory=list)
    rank_deficient: bool = False
    degenerate: bool = False
    n_interpolated: int | None = None

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CertificateCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


@dataclass
class RegressionFit:
    """One solved estimation problem."""

    intercept: float
    coefficients: np.ndarray
    objective: float
    residuals: np.ndarray
    certificate: Certificate


def _objective(problem: DesignProblem, residuals, coefficients) -> float:
    pen = problem.lam * np.abs(coefficients).sum() if problem.lam > 0 else 0.0
    if problem.theta is None:
        return float(residuals @ residuals + pen)
    return float(check_loss(residuals, problem.theta).sum() + pen)


def _make_fit(problem, intercept, coefficients, rank_deficient=False) -> RegressionFit:
    coefficients = np.asarray(coefficients, dtype=float).ravel()
    residuals = problem.response - intercept - problem.covariates @ coefficients
    fit = RegressionFit(
        intercept=float(intercept),
        coefficients=coefficients,
        objective=_objective(problem, residuals, coefficients),
        residuals=residuals,
        certificate=Certificate(),
    )
    fit.certificate = certify(fit, problem, rank_deficient=rank_deficient)
    return fit


def fit_ols(problem: DesignProblem) -> RegressionFit:
    """Least squares over (intercept, coefficients).

    Rank-deficient designs are resolved by the minimum-norm solution and
    flagged on the certificate.
    """
    if problem.theta is not None or problem.lam != 0.0:
        raise ValueError("fit_ols expects theta=None and lam=0")
    y, X = problem.response, problem.covariates
    D = np.column_stack([np.ones(y.size), X])
    beta, _, rank, _ = np.linalg.lstsq(D, y, rcond=None)
    return _make_fit(problem, beta[0], beta[1:], rank_deficient=rank < D.shape[1])


def _quantile_lp_primal(y, X, theta, lam):
    """Exact LP for the (possibly penalized) check-loss minimization.

    Variables: intercept (free), coefficients (free when lam == 0, split
    into positive/negative parts with cost lam otherwise), and the
    positive/negative residual parts with costs theta and 1 - theta.
    """
    T, p = X.shape
    eye = sp.identity(T, format="csc")
    if lam > 0:
        Xs = sp.csc_matrix(X)
        A = sp.hstack(
            [sp.csc_matrix(np.ones((T, 1))), Xs, -Xs, eye, -eye], format="csc"
        )
        c = np.concatenate(
            [[0.0], np.full(2 * p, lam), np.full(T, theta), np.full(T, 1.0 - theta)]
        )
        bounds = [(None, None)] + [(0, None)] * (2 * p + 2 * T)
    else:
        A = sp.hstack(
            [sp.csc_matrix(np.column_stack([np.ones(T), X])), eye, -eye],
            format="csc",
        )
        c = np.concatenate(
            [np.zeros(1 + p), np.full(T, theta), np.full(T, 1.0 - theta)]
        )
        bounds = [(None, None)] * (1 + p) + [(0, None)] * (2 * T)
    res = linprog(c, A_eq=A, b_eq=y, bounds=bounds, method="highs")
    if res.status == 3:
        raise SolverError("unbounded quantile regression LP")
    if res.status != 0:
        raise SolverError(f"quantile regression LP failed: {res.message}")
    xi = res.x[0]
    if lam > 0:
        w = res.x[1 : 1 + p] - res.x[1 + p : 1 + 2 * p]
    else:
        w = res.x[1 : 1 + p]
    return xi, w


def _quantile_lp_dual(y, X, theta, lam):
    """Dual of the check-loss LP: T box variables, a handful of rows.

    Coefficients come back as the equality/inequality marginals. Returns
    None when the solve or the marginals look irregular; the caller then
    falls back to the primal.
    """
    T, p = X.shape
    bounds = [(theta - 1.0, theta)] * T
    if lam > 0:
        res = linprog(
            -y,
            A_eq=np.ones((1, T)), b_eq=np.zeros(1),
            A_ub=np.vstack([X.T, -X.T]), b_ub=np.full(2 * p, lam),
            bounds=bounds, method="highs",
        )
        if res.status != 0 or res.eqlin.marginals is None:
            return None
        xi = -res.eqlin.marginals[0]
        mu = res.ineqlin.marginals
        w = -(mu[:p] - mu[p:])
    else:
        res = linprog(
            -y,
            A_eq=np.column_stack([np.ones(T), X]).T, b_eq=np.zeros(1 + p),
            bounds=bounds, method="highs",
        )
        if res.status != 0 or res.eqlin.marginals is None:
            return None
        beta = -res.eqlin.marginals
        xi, w = beta[0], beta[1:]
    return xi, w, -res.fun


def _quantile_lp(y, X, theta, lam):
    """Solve the check-loss LP, preferring the fast dual route.

    The recovered solution is accepted only when its recomputed objective
    closes the duality gap; otherwise the primal LP decides.
    """
    out = _quantile_lp_dual(y, X, theta, lam)
    if out is not None:
        xi, w, opt = out
        res_vec = y - xi - X @ w
        obj = check_loss(res_vec, theta).sum() + lam * np.abs(w).sum()
        if abs(obj - opt) <= 1e-7 * max(1.0, abs(opt)):
            return xi, w
    return _quantile_lp_primal(y, X, theta, lam)


def fit_qr(problem: DesignProblem) -> RegressionFit:
    """Quantile regression at level theta, solved to LP optimality."""
    if problem.theta is None:
        raise ValueError("fit_qr needs a quantile level")
    if problem.lam != 0.0:
        raise ValueError("fit_qr expects lam=0; use fit_qr_l1")
    return _fit_quantile(problem)


def fit_qr_l1(problem: DesignProblem) -> RegressionFit:
    """l1-penalized quantile regression; lam=0 falls back to the plain fit."""
    if problem.theta is None:
        raise ValueError("fit_qr_l1 needs a quantile level")
    return _fit_quantile(problem)


def _fit_quantile(problem: DesignProblem) -> RegressionFit:
    y, X, theta = problem.response, problem.covariates, problem.theta
    if y.size < 2:
        raise ValueError("quantile fit needs at least 2 observations")
    if problem.n_covariates == 0:
        # no-covariate problem: the type-1 empirical quantile is a minimizer
        return _make_fit(problem, empirical_quantile(y, theta), np.zeros(0))
    xi, w = _quantile_lp(y, X, theta, problem.lam)
    return _make_fit(problem, xi, w)


def _cd_sweep(y, X, col_norms, xi, w, lam):
    """One cyclic coordinate-descent pass; returns the max coefficient move."""
    res = y - xi - X @ w
    new_xi = xi + res.mean()
    res -= new_xi - xi
    delta = abs(new_xi - xi)
    for j in range(w.size):
        if col_norms[j] == 0.0:
            continue
        rho = X[:, j] @ res + col_norms[j] * w[j]
        # soft threshold at lam/2: the objective is sum(res^2), not half of it
        wj = np.sign(rho) * max(abs(rho) - lam / 2.0, 0.0) / col_norms[j]
        if wj != w[j]:
            res -= (wj - w[j]) * X[:, j]
            delta = max(delta, abs(wj - w[j]))
            w[j] = wj
    return new_xi, w, delta


def fit_ols_l1(problem: DesignProblem, max_iter: int = 10000,
               tol: float = 1e-8) -> RegressionFit:
    """l1-penalized least squares via cyclic coordinate descent.

    Stops when no coordinate (intercept included) moves more than ``tol``
    in a full sweep; raises NonConvergenceError with the best iterate
    attached if ``max_iter`` sweeps are exhausted first.
    """
    if problem.theta is not None:
        raise ValueError("fit_ols_l1 is a least-squares fit; theta must be None")
    if problem.lam == 0.0:
        return fit_ols(problem)
    y, X = problem.response, problem.covariates
    col_norms = (X ** 2).sum(axis=0)
    xi = y.mean()
    w = np.zeros(problem.n_covariates)
    for _ in range(max_iter):
        xi, w, delta = _cd_sweep(y, X, col_norms, xi, w, problem.lam)
        if delta <= tol:
            return _make_fit(problem, xi, w)
    raise NonConvergenceError(
        f"coordinate descent did not converge in {max_iter} sweeps "
        f"(last move {delta:.3e})",
        fit=_make_fit(problem, xi, w),
    )


def fit_problem(problem: DesignProblem) -> RegressionFit:
    """Dispatch on (theta, lam) to the matching fit routine."""
    if problem.theta is None:
        return fit_ols_l1(problem) if problem.lam > 0 else fit_ols(problem)
    return fit_qr_l1(problem) if problem.lam > 0 else fit_qr(problem)


def certify(fit: RegressionFit, problem: DesignProblem,
            rank_deficient: bool = False) -> Certificate:
    """Recheck the optimality conditions of a fit from scratch.

    Recomputes the objective, then checks the conditions appropriate to the
    problem: the residual-sign subgradient counts for quantile fits, the
    gradient norm for least squares, the coordinate fixed point for the
    l1-penalized least squares.
    """
    y, X = problem.response, problem.covariates
    w = fit.coefficients
    res = y - fit.intercept - X @ w
    scale = max(1.0, float(np.abs(y).max()))
    cert = Certificate(rank_deficient=rank_deficient)

    obj = _objective(problem, res, w)
    cert.checks.append(CertificateCheck(
        "objective_recompute",
        abs(fit.objective - obj) <= 1e-8 * max(1.0, abs(obj)),
        abs(fit.objective - obj), 1e-8 * max(1.0, abs(obj)),
    ))
    res_drift = float(np.abs(fit.residuals - res).max()) if res.size else 0.0
    cert.checks.append(CertificateCheck(
        "residual_recompute", res_drift <= 1e-8 * scale, res_drift, 1e-8 * scale,
    ))

    if problem.theta is not None:
        theta, T = problem.theta, problem.n_obs
        ztol = 1e-7 * scale
        neg = int((res < -ztol).sum())
        lez = int((res <= ztol).sum())
        cert.checks.append(CertificateCheck(
            "qr_subgradient_low", neg <= theta * T + 1e-9, float(neg), theta * T,
        ))
        cert.checks.append(CertificateCheck(
            "qr_subgradient_high", lez >= theta * T - 1e-9, float(lez), theta * T,
        ))
        cert.n_interpolated = int((np.abs(res) <= ztol).sum())
        if problem.lam == 0.0:
            cert.degenerate = cert.n_interpolated < problem.n_covariates + 1
    elif problem.lam == 0.0:
        D = np.column_stack([np.ones(y.size), X])
        g = float(np.abs(-2.0 * D.T @ res).max())
        cert.checks.append(CertificateCheck(
            "ols_gradient", g < 1e-6 * scale, g, 1e-6 * scale,
        ))
    else:
        # coordinate fixed point: one virtual sweep must not move anything
        col_norms = (X ** 2).sum(axis=0)
        _, w2, delta = _cd_sweep(y, X, col_norms, fit.intercept, w.copy(), problem.lam)
        bound = 1e-8 * max(1.0, float(np.abs(w).max()) if w.size else 1.0)
        cert.checks.append(CertificateCheck(
            "lasso_stationarity", delta <= bound, delta, bound,
        ))
    return cert


class _FittedRegression(BaseEstimator, RegressorMixin):
    """Shared attribute storage and prediction for the estimator classes."""

    def _store(self, f: RegressionFit, X):
        self.intercept_ = f.intercept
        self.coef_ = f.coefficients
        self.residuals_ = f.residuals
        self.objective_ = f.objective
        self.certificate_ = f.certificate
        self.fit_ = f
        self.n_features_in_ = X.shape[1]

    def predict(self, X):
        X = check_array(X)
        return self.intercept_ + X @ self.coef_


class QuantileRegression(_FittedRegression):
    """sklearn-style quantile regression, optionally l1-penalized.

    Exposes ``intercept_``, ``coef_``, ``residuals_``, ``objective_`` and
    the optimality ``certificate_`` after ``fit``.
    """

    def __init__(self, theta: float = 0.5, lam: float = 0.0):
        self.theta = theta
        self.lam = lam

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        problem = DesignProblem(y, X, theta=self.theta, lam=self.lam)
        f = fit_qr_l1(problem) if self.lam > 0 else fit_qr(problem)
        self._store(f, X)
        return self


class LeastSquaresRegression(_FittedRegression):
    """sklearn-style least squares, optionally l1-penalized."""

    def __init__(self, lam: float = 0.0):
        self.lam = lam

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        problem = DesignProblem(y, X, theta=None, lam=self.lam)
        f = fit_ols_l1(problem) if self.lam > 0 else fit_ols(problem)
        self._store(f, X)
        return self
