import math

import numpy as np
import pytest

from quadlink.forecast import lambda_ols
from quadlink.metrics import (
    GAUSSIAN_KAPPA,
    DegenerateDenominator,
    KappaEstimate,
    LengthMismatch,
    MetricPoint,
    ZeroVolatility,
    directional_accuracy,
    kappa_hat,
    mse,
    r2_oos,
    theoretical_r2,
    zero_positive_sign,
)


class TestDirectionalAccuracy:
    def test_zero_counts_as_positive(self):
        assert list(zero_positive_sign(np.array([-2.0, 0.0, 3.0]))) == [
            -1,
            1,
            1,
        ]

    def test_by_hand(self):
        actual = [1.0, -1.0, 0.0, 2.0]
        mu = [1.0, 1.0, 0.0, -1.0]

        assert directional_accuracy(actual, mu) == 0.5

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            directional_accuracy([1.0, 2.0], [1.0])


class TestR2:
    def test_zero_forecast_scores_zero(self):
        assert r2_oos([0.1, -0.2, 0.3], [0.0, 0.0, 0.0]) == 0.0

    def test_perfect_forecast_scores_one(self):
        actual = [0.1, -0.2, 0.3]

        assert r2_oos(actual, actual) == 1.0
        assert mse(actual, actual) == 0.0

    def test_by_hand(self):
        # 1 - (0.25 + 0.25) / (1 + 1)
        assert r2_oos([1.0, -1.0], [0.5, -0.5]) == pytest.approx(0.75)

    def test_all_zero_actuals(self):
        with pytest.raises(DegenerateDenominator):
            r2_oos([0.0, 0.0], [0.1, 0.2])

    def test_empty(self):
        with pytest.raises(LengthMismatch):
            r2_oos([], [])

    @pytest.mark.parametrize("scale", [3.7, -2.0, 1e-4])
    def test_scale_invariant(self, scale):
        rng = np.random.default_rng(3)
        actual, mu = rng.standard_normal(50), rng.standard_normal(50)

        assert r2_oos(scale * actual, scale * mu) == pytest.approx(
            r2_oos(actual, mu)
        )

    def test_negative_exactly_when_worse_than_zero(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            actual = rng.standard_normal(20)
            mu = rng.standard_normal(20) * rng.uniform(0, 1.5)

            worse = np.sum((actual - mu) ** 2) > np.sum(actual**2)
            assert (r2_oos(actual, mu) < 0) == worse

    def test_least_squares_fit_is_orthogonal(self):
        rng = np.random.default_rng(5)
        actual = rng.standard_normal(300)
        regressor = np.sign(actual) * rng.uniform(0.5, 2.0, 300)
        mu = lambda_ols(actual, regressor) * regressor

        total = np.sum(actual**2)
        explained, residual = np.sum(mu**2), np.sum((actual - mu) ** 2)

        assert explained + residual == pytest.approx(total, rel=1e-8)
        assert r2_oos(actual, mu) == pytest.approx(explained / total)


class TestKappa:
    def test_constant_magnitude_gives_one(self):
        signs = np.where(np.random.default_rng(0).random(500) < 0.5, -1, 1)
        actual = 0.01 * signs
        vols = np.full(500, 0.02)

        estimate = kappa_hat(actual, vols)

        assert estimate.kappa_hat == pytest.approx(1.0)
        assert estimate.z_bar == pytest.approx(0.5)
        assert estimate.t_oos == 500

    def test_gaussian_baseline(self):
        actual = np.random.default_rng(1).standard_normal(100000)

        estimate = kappa_hat(actual, np.ones_like(actual))

        assert estimate.kappa_hat == pytest.approx(GAUSSIAN_KAPPA, abs=0.01)
        assert estimate.gaussian_ratio == pytest.approx(1.0, abs=0.02)

    def test_zero_volatility(self):
        with pytest.raises(ZeroVolatility):
            kappa_hat([0.1, 0.2], [0.1, 0.0])

    def test_all_zero_actuals(self):
        with pytest.raises(DegenerateDenominator):
            kappa_hat([0.0, 0.0], [0.1, 0.1])

    def test_gaussian_ratio(self):
        estimate = KappaEstimate(kappa_hat=1 / math.pi, z_bar=1.0, t_oos=1)

        assert estimate.gaussian_ratio == pytest.approx(0.5)

    @pytest.mark.parametrize("scale", [0.01, 250.0])
    def test_scale_invariant(self, scale):
        rng = np.random.default_rng(6)
        actual = rng.standard_normal(400)
        vols = rng.uniform(0.5, 2.0, 400)

        scaled = kappa_hat(scale * actual, scale * vols)

        assert scaled.kappa_hat == pytest.approx(
            kappa_hat(actual, vols).kappa_hat
        )


class TestTheoreticalR2:
    @pytest.mark.parametrize(
        "da, expected", [(0.5, 0.0), (0.75, 0.15), (1.0, 0.6), (0.0, 0.6)]
    )
    def test_quadratic_law(self, da, expected):
        assert theoretical_r2(da, 0.6) == pytest.approx(expected)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            theoretical_r2(1.2, 0.6)
        with pytest.raises(ValueError):
            theoretical_r2(0.7, 0.0)

    @pytest.mark.parametrize("offset", [0.05, 0.2, 0.37, 0.5])
    def test_symmetric_about_coin_flip(self, offset):
        assert theoretical_r2(0.5 + offset, 0.55) == pytest.approx(
            theoretical_r2(0.5 - offset, 0.55)
        )

    def test_increasing_above_coin_flip(self):
        values = [theoretical_r2(da, 0.48) for da in np.linspace(0.5, 1, 51)]

        assert np.all(np.diff(values) > 0)


class TestMetricPoint:
    def test_accuracy_outside_unit_interval(self):
        with pytest.raises(ValueError):
            MetricPoint(0, 0.5, 0, "type1", 1.5, 0.0)

    def test_r2_above_one(self):
        with pytest.raises(ValueError):
            MetricPoint(0, 0.5, 0, "type1", 0.5, 1.5)
