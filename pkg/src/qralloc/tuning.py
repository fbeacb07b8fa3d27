"""Data-driven selection of the l1 penalty weight.

The pivotal route simulates the distribution of the largest normalized
quantile-score component under independent uniform draws, conditional on
the observed covariates, and converts a high quantile of it into a penalty
level. The calibration route instead searches for the penalty that lands a
target number of active positions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .indicators import empirical_quantile

__all__ = [
    "LambdaRule",
    "LambdaChoice",
    "LassoCalibration",
    "simulate_pivot",
    "optimal_lambda",
    "calibrate_lasso_lambda",
]

_METHODS = ("pivotal-simulation", "fixed", "match-active-count")
_CHUNK = 8192  # fixed chunk size keeps the sample layout schedule-independent


@dataclass(frozen=True)
class LambdaRule:
    """How a strategy resolves its penalty weight."""

    method: str = "pivotal-simulation"
    theta_set: tuple | None = None  # None -> singleton of the strategy's theta
    n_sims: int = 100_000
    confidence: float = 0.9
    fixed_value: float | None = None
    target_active: int | None = None
    search_bounds: tuple | None = None  # None: expand the upper bound as needed
    recompute_per_window: bool = False
    rng_seed: int = 0

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ConfigError(f"lambda_rule.method: unknown method '{self.method}'")
        if self.n_sims < 1:
            raise ConfigError("lambda_rule.n_sims: must be >= 1")
        if not 0.0 < self.confidence < 1.0:
            raise ConfigError("lambda_rule.confidence: must be in (0, 1)")
        if self.theta_set is not None:
            if len(self.theta_set) == 0:
                raise ConfigError("lambda_rule.theta_set: must be nonempty")
            for t in self.theta_set:
                if not 0.0 < t < 1.0:
                    raise ConfigError(f"lambda_rule.theta_set: level {t} outside (0, 1)")
        if self.method == "fixed":
            if self.fixed_value is None or self.fixed_value < 0:
                raise ConfigError("lambda_rule.fixed_value: need a value >= 0")
        if self.method == "match-active-count":
            if self.target_active is None or self.target_active < 1:
                raise ConfigError("lambda_rule.target_active: need a count >= 1")


@dataclass(frozen=True)
class LambdaChoice:
    """The resolved penalty for one quantile level."""

    theta: float
    lambda_star: float
    tau: float
    window_length: int
    n_samples: int
    sample_mean: float
    sample_quantile: float
    confidence: float


@dataclass(frozen=True)
class LassoCalibration:
    """Outcome of the active-count bisection."""

    lam: float
    active_count: int
    converged: bool
    monotone: bool


def simulate_pivot(covariates, theta_set, n_sims: int = 100_000,
                   rng_seed: int = 0) -> np.ndarray:
    """Simulate the pivotal statistic conditional on the covariates.

    Each sample draws T fresh i.i.d. uniforms e_t and evaluates

        sup over theta in theta_set, max over columns j of
        | sum_t r*_jt (theta - 1{e_t <= theta}) / (sigma_j sqrt(theta(1-theta))) |

    with sigma_j^2 the raw second moment of column j. Samples are
    nonnegative and reproducible given the seed; generation is chunked
    with per-chunk derived substreams so the result does not depend on
    any parallel schedule.
    """
    X = np.asarray(covariates, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.size == 0:
        raise ValueError("empty covariate matrix")
    theta_set = tuple(theta_set)
    if not theta_set:
        raise ValueError("theta_set must be nonempty")
    for t in theta_set:
        if not 0.0 < t < 1.0:
            raise ValueError(f"quantile level {t} outside (0, 1)")
    sig2 = (X ** 2).mean(axis=0)
    zero = np.flatnonzero(sig2 == 0.0)
    if zero.size:
        raise ValueError(f"zero-variance covariate column {zero[0]}")
    # T * (1/T) cancels: each sample is the sup-max of |X_norm' (theta - 1{e<=theta})|
    normalized = {
        t: X / (np.sqrt(sig2) * math.sqrt(t * (1.0 - t))) for t in theta_set
    }
    T = X.shape[0]
    out = np.empty(n_sims)
    n_chunks = (n_sims + _CHUNK - 1) // _CHUNK
    children = np.random.SeedSequence(rng_seed).spawn(n_chunks)
    for i in range(n_chunks):
        lo, hi = i * _CHUNK, min((i + 1) * _CHUNK, n_sims)
        u = np.random.default_rng(children[i]).random((hi - lo, T))
        best = np.zeros(hi - lo)
        for t in theta_set:
            scores = (t - (u <= t)) @ normalized[t]
            np.maximum(best, np.abs(scores).max(axis=1), out=best)
        out[lo:hi] = best
    return out


def optimal_lambda(samples, theta: float, T: int,
                   confidence: float = 0.9) -> LambdaChoice:
    """Convert simulated pivot samples into a penalty level.

    tau is twice the empirical confidence-quantile of the samples and
    lambda_star = tau * sqrt(theta * (1 - theta)) / T, with T the length
    of the estimation window the penalty will be used on.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ValueError("empty pivot sample array")
    q = empirical_quantile(samples, confidence)
    tau = 2.0 * q
    return LambdaChoice(
        theta=theta,
        lambda_star=tau * math.sqrt(theta * (1.0 - theta)) / T,
        tau=tau,
        window_length=T,
        n_samples=samples.size,
        sample_mean=float(samples.mean()),
        sample_quantile=q,
        confidence=confidence,
    )


def calibrate_lasso_lambda(window, target_active: int,
                           bounds: tuple | None = None,
                           tolerance: int = 2,
                           max_iter: int = 60,
                           spec_template=None) -> LassoCalibration:
    """Bisect log-lambda until the thresholded active count hits a target.

    Works on a return window; each probe runs the full allocation with a
    fixed penalty and counts active positions. With ``bounds=None`` the
    upper bound grows geometrically until it pins the book to the
    numeraire; explicit bounds are respected as given. Stops when the
    count is within ``tolerance`` of ``target_active`` or the bounds are
    exhausted, returning the best penalty seen (flagged non-converged, and
    flagged non-monotone if the count did not decrease along increasing
    lambda). ``spec_template`` defaults to a LASSO strategy and may be any
    penalized strategy spec whose rule is to be replaced by the probe
    value.
    """
    from dataclasses import replace

    from .allocation import StrategySpec, estimate_weights  # cycle broken at runtime

    values = getattr(window, "values", window)
    n = np.asarray(values).shape[1]
    if not 1 <= target_active <= n:
        raise ConfigError(f"target_active must be in [1, {n}], got {target_active}")
    if spec_template is None:
        spec_template = StrategySpec(
            "LASSO", lambda_rule=LambdaRule(method="fixed", fixed_value=0.0)
        )

    def count_at(lam: float) -> int:
        spec = replace(
            spec_template, lambda_rule=LambdaRule(method="fixed", fixed_value=lam)
        )
        return estimate_weights(spec, window).active_count

    seen = []

    def probe(lam):
        c = count_at(lam)
        seen.append((lam, c))
        return c

    if bounds is None:
        lo, hi = 1e-6, 1.0
        c_hi = probe(hi)
        while c_hi > target_active and hi < 1e9:
            hi *= 8.0
            c_hi = probe(hi)
        probe(lo)
    else:
        lo, hi = bounds
        if not 0 < lo < hi:
            raise ConfigError(f"bad search bounds {bounds}")
        probe(lo)
        probe(hi)
    best = min(seen, key=lambda lc: (abs(lc[1] - target_active), lc[0]))
    for _ in range(max_iter):
        if abs(best[1] - target_active) <= tolerance or hi / lo < 1.0 + 1e-9:
            break
        mid = math.sqrt(lo * hi)
        c_mid = probe(mid)
        if abs(c_mid - target_active) < abs(best[1] - target_active):
            best = (mid, c_mid)
        if c_mid > target_active:
            lo = mid
        else:
            hi = mid
    ordered = sorted(seen)
    monotone = all(
        ordered[i][1] >= ordered[i + 1][1] for i in range(len(ordered) - 1)
    )
    return LassoCalibration(
        lam=best[0],
        active_count=best[1],
        converged=abs(best[1] - target_active) <= tolerance,
        monotone=monotone,
    )
