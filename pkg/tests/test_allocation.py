import numpy as np
import pytest

from conftest import make_panel
from qralloc.allocation import (
    PortfolioAllocator,
    StrategySpec,
    deviation_design,
    estimate_weights,
    recover_weights,
    select_numeraire,
    threshold_positions,
)
from qralloc.errors import ConfigError, DataError
from qralloc.indicators import psi1_hat
from qralloc.regression import DesignProblem, fit_ols
from qralloc.tuning import LambdaRule


def fixed_rule(lam):
    return LambdaRule(method="fixed", fixed_value=lam)


class TestStrategySpec:
    def test_theta_required_iff_quantile(self):
        with pytest.raises(ConfigError):
            StrategySpec("QR")
        with pytest.raises(ConfigError):
            StrategySpec("OLS", theta=0.5)

    def test_lambda_rule_required_iff_penalized(self):
        with pytest.raises(ConfigError):
            StrategySpec("PQR", theta=0.5)
        with pytest.raises(ConfigError):
            StrategySpec("QR", theta=0.5, lambda_rule=fixed_rule(1.0))

    def test_numeraire_defaults(self):
        assert StrategySpec("OLS").numeraire_rule == "last-column"
        assert StrategySpec("QR", theta=0.5).numeraire_rule == "last-column"
        assert StrategySpec("LASSO", lambda_rule=fixed_rule(0.1)).numeraire_rule == "lowest-psi1"
        assert StrategySpec("PQR", theta=0.5, lambda_rule=fixed_rule(0.1)).numeraire_rule == "lowest-psi1"

    def test_labels(self):
        assert StrategySpec("OLS").label == "OLS"
        assert StrategySpec("QR", theta=0.1).label == "QR(0.1)"
        assert StrategySpec("PQR", theta=0.5, lambda_rule=fixed_rule(1)).label == "PQR(0.5)"


class TestSelectNumeraire:
    def test_constant_series(self):
        values = np.column_stack([np.full(12, 1.0), np.full(12, -1.0)])
        assert select_numeraire(values, 0.9) == 0

    def test_identical_columns_tie_break(self, rng):
        col = rng.normal(size=15)
        values = np.column_stack([col, col, col])
        assert select_numeraire(values, 0.9) == 0

    def test_matches_exhaustive_scan(self, rng):
        values = rng.normal(0.1, 2.0, size=(40, 5))
        k = select_numeraire(values, 0.85)
        scores = [psi1_hat(values[:, j], 0.85) for j in range(5)]
        assert k == int(np.argmin(scores))

    def test_needs_ten_rows(self, rng):
        with pytest.raises(DataError):
            select_numeraire(rng.normal(size=(9, 3)), 0.9)


class TestDeviationDesign:
    def test_two_assets(self):
        response, cov = deviation_design(np.array([[3.0, 1.0], [2.0, 5.0]]), k=0)
        assert response.tolist() == [3.0, 2.0]
        assert cov[:, 0].tolist() == [2.0, -3.0]

    def test_identical_column_gives_zero_covariate(self, rng):
        col = rng.normal(size=10)
        values = np.column_stack([col, col])
        _, cov = deviation_design(values, k=0)
        assert (cov == 0).all()

    def test_budget_identity(self, rng):
        # r_k - sum_j w_j (r_k - r_j) is the portfolio return of any budget w
        values = rng.normal(size=(20, 6))
        w = rng.normal(size=6)
        w = w / w.sum()
        k = 2
        response, cov = deviation_design(values, k)
        others = [j for j in range(6) if j != k]
        lhs = response - cov @ w[others]
        assert lhs == pytest.approx(values @ w)

    def test_column_ordering(self, rng):
        values = rng.normal(size=(12, 4))
        _, cov = deviation_design(values, k=1)
        expect = np.column_stack([
            values[:, 1] - values[:, 0],
            values[:, 1] - values[:, 2],
            values[:, 1] - values[:, 3],
        ])
        assert cov == pytest.approx(expect)


class TestRecoverWeights:
    def test_zero_coefficients_pure_numeraire(self, rng):
        f = fit_ols(DesignProblem(rng.normal(size=12), rng.normal(size=(12, 2))))
        f.coefficients = np.zeros(2)
        wv = recover_weights(f, k=1, n=3)
        assert wv.weights.tolist() == [0.0, 1.0, 0.0]

    def test_arithmetic(self, rng):
        f = fit_ols(DesignProblem(rng.normal(size=12), rng.normal(size=(12, 2))))
        f.coefficients = np.array([0.3, 0.2])
        wv = recover_weights(f, k=2, n=3)
        assert wv.weights == pytest.approx([0.3, 0.2, 0.5])

    def test_budget_exact(self, rng):
        for _ in range(20):
            n = int(rng.integers(3, 9))
            coef = rng.normal(size=n - 1)
            f = fit_ols(DesignProblem(rng.normal(size=n + 5), rng.normal(size=(n + 5, n - 1))))
            f.coefficients = coef
            k = int(rng.integers(0, n))
            wv = recover_weights(f, k, n)
            assert abs(wv.weights.sum() - 1.0) < 1e-12


class TestThresholdPositions:
    def test_small_weight_zeroed(self, rng):
        f = fit_ols(DesignProblem(rng.normal(size=10), rng.normal(size=(10, 1))))
        f.coefficients = np.array([0.0004])
        wv = recover_weights(f, k=1, n=2, threshold=0.0005)
        out = threshold_positions(wv)
        assert out.weights.tolist() == [0.0, 1.0]
        assert out.active_count == 1

    def test_no_op_above_threshold(self, rng):
        f = fit_ols(DesignProblem(rng.normal(size=10), rng.normal(size=(10, 2))))
        f.coefficients = np.array([0.4, 0.2])
        wv = recover_weights(f, k=0, n=3)
        out = threshold_positions(wv)
        assert out.weights == pytest.approx(wv.weights)

    def test_budget_preserved_random(self, rng):
        f = fit_ols(DesignProblem(rng.normal(size=10), rng.normal(size=(10, 7))))
        for _ in range(1000):
            f.coefficients = np.where(
                rng.uniform(size=7) < 0.5, rng.normal(size=7), rng.normal(size=7) * 1e-4
            )
            wv = recover_weights(f, k=3, n=8)
            out = threshold_positions(wv)
            assert abs(out.weights.sum() - 1.0) < 1e-12
            assert out.active_count == int((np.abs(out.weights) > out.threshold).sum())


class TestEstimateWeights:
    def test_gmvp_on_exchangeable_pair(self, rng):
        values = rng.normal(0.0, 1.0, size=(400, 2))
        wv = estimate_weights(StrategySpec("OLS"), values)
        S = np.cov(values, rowvar=False, ddof=1)
        oracle = np.linalg.solve(S, np.ones(2))
        oracle /= oracle.sum()
        assert wv.weights == pytest.approx(oracle, abs=1e-10)
        assert wv.weights == pytest.approx([0.5, 0.5], abs=0.15)

    def test_gmvp_oracle_random_windows(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 8))
            values = rng.normal(0.05, 1.0, size=(60, n))
            wv = estimate_weights(StrategySpec("OLS"), values)
            S = np.cov(values, rowvar=False, ddof=1)
            oracle = np.linalg.solve(S, np.ones(n))
            oracle /= oracle.sum()
            assert wv.weights == pytest.approx(oracle, abs=1e-6)

    def test_pqr_with_target_one_is_numeraire_only(self, rng):
        values = rng.normal(0.05, 1.0, size=(120, 5))
        rule = LambdaRule(method="match-active-count", target_active=1)
        wv = estimate_weights(StrategySpec("PQR", theta=0.5, lambda_rule=rule), values)
        k = wv.numeraire_index
        assert wv.weights[k] == pytest.approx(1.0, abs=0.01)
        assert wv.active_count <= 3

    def test_budget_holds(self, rng):
        specs = [
            StrategySpec("OLS"),
            StrategySpec("QR", theta=0.2),
            StrategySpec("LASSO", lambda_rule=fixed_rule(0.5)),
            StrategySpec("PQR", theta=0.8, lambda_rule=fixed_rule(0.5)),
        ]
        values = rng.normal(0.02, 1.5, size=(90, 6))
        for spec in specs:
            wv = estimate_weights(spec, values)
            assert abs(wv.weights.sum() - 1.0) < 1e-10

    def test_numeraire_invariance_unpenalized(self, rng):
        values = rng.normal(0.0, 1.2, size=(70, 5))
        for est, kwargs in (("OLS", {}), ("QR", {"theta": 0.3})):
            series = []
            for k in range(5):
                spec = StrategySpec(est, numeraire_rule="fixed", numeraire_asset=k, **kwargs)
                series.append(values @ estimate_weights(spec, values).weights)
            for s in series[1:]:
                assert np.abs(s - series[0]).max() < 1e-6

    def test_insample_variance_dominance(self, rng):
        values = rng.normal(0.05, 1.0, size=(100, 6))
        ols = values @ estimate_weights(StrategySpec("OLS"), values).weights
        for spec in (
            StrategySpec("QR", theta=0.1),
            StrategySpec("QR", theta=0.9),
            StrategySpec("PQR", theta=0.5, lambda_rule=fixed_rule(0.4)),
            StrategySpec("LASSO", lambda_rule=fixed_rule(0.4)),
        ):
            other = values @ estimate_weights(spec, values).weights
            assert ols.var(ddof=1) <= other.var(ddof=1) + 1e-12

    def test_insufficient_sample_message(self, rng):
        values = rng.normal(size=(5, 5))
        with pytest.raises(DataError, match="insufficient sample for unpenalized fit"):
            estimate_weights(StrategySpec("OLS"), values)

    def test_penalized_handles_wide_window(self, rng):
        values = rng.normal(0.0, 1.0, size=(12, 15))
        rule = fixed_rule(1.0)
        wv = estimate_weights(StrategySpec("PQR", theta=0.5, lambda_rule=rule), values)
        assert abs(wv.weights.sum() - 1.0) < 1e-10

    def test_named_numeraire_on_panel(self, rng):
        panel = make_panel(rng.normal(size=(30, 3)))
        spec = StrategySpec("QR", theta=0.5, numeraire_rule="fixed", numeraire_asset="A002")
        # smoke: resolves the asset name through the panel labels
        wv = estimate_weights(spec, panel)
        assert wv.numeraire_index == 1


class TestPortfolioAllocator:
    def test_sklearn_surface(self, rng):
        from sklearn.base import clone

        values = rng.normal(0.05, 1.0, size=(80, 4))
        alloc = PortfolioAllocator(StrategySpec("QR", theta=0.5))
        assert "spec" in alloc.get_params()
        alloc.fit(values)
        assert alloc.weights_.sum() == pytest.approx(1.0)
        assert alloc.predict(values) == pytest.approx(values @ alloc.weights_)
        clone(alloc).fit(values)

    def test_default_is_ols(self, rng):
        values = rng.normal(size=(50, 3))
        alloc = PortfolioAllocator().fit(values)
        direct = estimate_weights(StrategySpec("OLS"), values)
        assert alloc.weights_ == pytest.approx(direct.weights)
