import math

import numpy as np
import pytest

from qralloc.errors import DegenerateSeriesError, UndefinedRatioError
from qralloc.indicators import (
    REPORT_FIELDS,
    alpha_risk_hat,
    compute_report,
    empirical_quantile,
    mad_hat,
    omega_hat,
    psi1_hat,
    psi2_hat,
    rachev_hat,
    sharpe_hat,
    turnover,
    wealth_path,
)


class TestEmpiricalQuantile:
    def test_median_of_five(self):
        assert empirical_quantile([1, 2, 3, 4, 5], 0.5) == 3

    def test_low_level_first_order_statistic(self):
        assert empirical_quantile([1, 2, 3, 4, 5], 0.2) == 1

    def test_permutation_invariant(self, rng):
        r = rng.normal(size=40)
        shuffled = rng.permutation(r)
        for p in (0.1, 0.37, 0.5, 0.9):
            assert empirical_quantile(r, p) == empirical_quantile(shuffled, p)

    def test_float_ceil_guard(self):
        # p * T = 21 mathematically, 21.000000000000004 in floats
        r = np.arange(1.0, 301.0)
        assert empirical_quantile(r, 0.07) == 21.0

    def test_rejects_empty_and_bad_level(self):
        with pytest.raises(ValueError):
            empirical_quantile([], 0.5)
        with pytest.raises(ValueError):
            empirical_quantile([1, 2], 1.0)


class TestPsi1:
    def test_hand_evaluation(self):
        # Q_0.8 of (-2,-1,0,1,2) is 1; mean of the four points at or below
        assert psi1_hat([-2, -1, 0, 1, 2], 0.8) == pytest.approx(0.5)

    def test_constant_series(self):
        assert psi1_hat([3.5] * 6, 0.5) == pytest.approx(-3.5)

    def test_full_sample_limit_is_negative_mean(self):
        r = np.array([-1.0, 2.0, 0.5, 3.0, -0.25])
        # ceil(0.95 * 5) = 5: every point included
        assert psi1_hat(r, 0.95) == pytest.approx(-r.mean())

    def test_weakly_decreasing_in_psi(self, rng):
        r = rng.normal(size=37)
        values = [psi1_hat(r, p) for p in np.linspace(0.05, 0.95, 19)]
        assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))

    def test_permutation_invariant(self, rng):
        r = rng.normal(size=25)
        assert psi1_hat(r, 0.9) == pytest.approx(
            psi1_hat(rng.permutation(r), 0.9), rel=1e-12
        )


class TestAlphaRisk:
    def test_single_point_tail(self):
        assert alpha_risk_hat([-2, -1, 0, 1, 2], 0.2) == pytest.approx(2.0)

    def test_shares_code_path_with_psi1(self, rng):
        r = rng.normal(size=31)
        for a in (0.1, 0.25, 0.5):
            assert alpha_risk_hat(r, a) == psi1_hat(r, a)

    def test_translation(self, rng):
        r = rng.normal(size=30)
        assert alpha_risk_hat(r + 0.7, 0.1) == pytest.approx(
            alpha_risk_hat(r, 0.1) - 0.7
        )

    def test_positive_homogeneity(self, rng):
        r = rng.normal(size=30)
        assert alpha_risk_hat(3.0 * r, 0.1) == pytest.approx(3.0 * alpha_risk_hat(r, 0.1))


class TestPsi2:
    def test_hand_evaluation(self):
        # Q_0.8 = 3; numerator 2 + 3, denominator |-1 - 1|
        assert psi2_hat([-1, -1, 2, 3, 4], 0.8) == pytest.approx(2.5)

    def test_all_negative_is_zero(self):
        assert psi2_hat([-3, -1, -2], 0.9) == 0.0

    def test_no_negative_raises(self):
        with pytest.raises(UndefinedRatioError):
            psi2_hat([1, 2, 3], 0.9)

    def test_ranking_divergence_fixture(self):
        # strategy A nets (-34.04, +8.13), B nets (-33.74, +7.95): B wins on the
        # sum, A wins on the ratio
        a = np.array([-34.04, 4.0, 4.13, 100.0])
        b = np.array([-33.74, 3.95, 4.0, 100.0])
        psi = 0.75  # third order statistic caps the big positive outcome
        sum_a = a[(a < 0) | (a <= empirical_quantile(a, psi))].sum()
        sum_b = b[(b < 0) | (b <= empirical_quantile(b, psi))].sum()
        assert sum_b > sum_a  # B better on the net-favorable sum
        ratio_a = psi2_hat(a, psi)
        ratio_b = psi2_hat(b, psi)
        assert ratio_a == pytest.approx(8.13 / 34.04)
        assert ratio_b == pytest.approx(7.95 / 33.74)
        assert ratio_a > ratio_b  # A better on the ratio
        assert ratio_a == pytest.approx(0.2389, abs=1e-4)
        assert ratio_b == pytest.approx(0.2356, abs=1e-4)


class TestMad:
    def test_hand(self):
        assert mad_hat([1, 2, 3]) == pytest.approx(2.0 / 3.0)

    def test_constant(self):
        assert mad_hat([4, 4, 4, 4]) == 0.0

    def test_bounded_by_population_std(self, rng):
        for _ in range(1000):
            r = rng.normal(size=rng.integers(2, 30))
            assert mad_hat(r) <= r.std() + 1e-12


class TestSharpe:
    def test_symmetric_pair(self):
        assert sharpe_hat([1, -1]) == 0.0

    def test_scale_invariant(self, rng):
        r = rng.normal(0.1, 1.0, size=50)
        assert sharpe_hat(5.0 * r) == pytest.approx(sharpe_hat(r))

    def test_degenerate(self):
        with pytest.raises(DegenerateSeriesError):
            sharpe_hat([2, 2, 2])


class TestOmegaRachev:
    def test_omega_symmetric(self):
        assert omega_hat([-1, 1]) == pytest.approx(1.0)

    def test_omega_all_positive_raises(self):
        with pytest.raises(UndefinedRatioError):
            omega_hat([1, 2, 0.5])

    def test_rachev_hand(self):
        assert rachev_hat([-2, -1, 0, 1, 2], 0.2, 0.8) == pytest.approx(1.0)

    def test_rachev_empty_upper_tail(self):
        with pytest.raises(UndefinedRatioError):
            rachev_hat([-1, 2, 2, 2], 0.25, 0.9)

    def test_tail_indicators_permutation_invariant(self, rng):
        r = rng.normal(size=41)
        s = rng.permutation(r)
        approx = lambda v: pytest.approx(v, rel=1e-12)
        assert psi1_hat(r, 0.9) == approx(psi1_hat(s, 0.9))
        assert psi2_hat(r, 0.9) == approx(psi2_hat(s, 0.9))
        assert rachev_hat(r, 0.1, 0.9) == approx(rachev_hat(s, 0.1, 0.9))
        assert omega_hat(r) == approx(omega_hat(s))


class TestTurnover:
    def test_constant_weights(self):
        assert turnover([[0.5, 0.5], [0.5, 0.5], [0.5, 0.5]]) == 0.0

    def test_one_move(self):
        # 0.1 of mass moved once across two dates, normalized by 2 dates
        assert turnover([[0.6, 0.4], [0.5, 0.5]]) == pytest.approx(0.1)

    def test_asset_permutation_invariant(self, rng):
        w = rng.dirichlet(np.ones(4), size=6)
        perm = rng.permutation(4)
        assert turnover(w) == pytest.approx(turnover(w[:, perm]))

    def test_single_date_rejected(self):
        with pytest.raises(ValueError):
            turnover([[1.0, 0.0]])


class TestWealth:
    def test_flat(self):
        assert wealth_path([0, 0, 0]).tolist() == [100, 100, 100, 100]

    def test_up_down(self):
        assert wealth_path([10, -10])[-1] == pytest.approx(99.0)


class TestDecompositionIdentity:
    def test_psi1_equals_negative_plus_capped_positive(self, rng):
        # on a series with no zeros and a positive cap quantile, the tail mean
        # splits into the negative mass plus the capped positive mass
        for _ in range(50):
            r = rng.normal(0.3, 1.0, size=41)
            r = r[r != 0.0]
            q = empirical_quantile(r, 0.9)
            if q <= 0:
                continue
            neg = r[r < 0].sum()
            capped = r[(r >= 0) & (r <= q)].sum()
            count = (r <= q).sum()
            assert psi1_hat(r, 0.9) == pytest.approx(-(neg + capped) / count)


class TestReport:
    def test_fixed_field_names(self, rng):
        rep = compute_report(rng.normal(size=60))
        d = rep.as_dict()
        assert tuple(d.keys()) == REPORT_FIELDS
        assert d["alpha"] == 0.1 and d["psi"] == 0.9

    def test_inf_and_nan_fallbacks(self):
        rep = compute_report([1.0, 2.0, 3.0])  # no negatives
        assert math.isinf(rep.psi2) and math.isinf(rep.omega)
        rep = compute_report([2, 2, 2, 2])
        assert math.isnan(rep.sharpe)

    def test_turnover_populated_with_weights(self, rng):
        w = rng.dirichlet(np.ones(3), size=5)
        rep = compute_report(rng.normal(size=5), weights=w)
        assert rep.turnover == pytest.approx(turnover(w))
