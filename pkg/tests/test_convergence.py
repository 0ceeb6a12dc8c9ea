import math

import numpy as np
import pytest

from ouvol.convergence import (
    OrderFit,
    em_vs_exact_strong_error,
    fit_order,
    price_error_order,
    sigma_bar_error_order,
)
from ouvol.pricing import MarketParams
from ouvol.sde import OUParams
from ouvol.volatility import AbsAffine, ExpShift

SEED = 7
OU = OUParams(alpha=1.0, k=0.1, y0=0.1)
MKT = MarketParams(1.0, 1.0, 0.02, 1.0)


class TestFitOrder:
    def test_exact_power_law(self):
        m = [10, 100, 1000]
        errors = np.array([[3.0 / mi for mi in m]] * 4)
        fit = fit_order(m, errors, 4)
        assert fit.fitted_order == pytest.approx(1.0, abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
        assert fit.std_errors == (0.0, 0.0, 0.0)

    def test_half_order(self):
        m = [4, 16, 64, 256]
        fit = fit_order(m, np.array([[mi**-0.5 for mi in m]]), 1)
        assert fit.fitted_order == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("ladder", [[10, 100], [10], [100, 10, 1000], [10, 10, 100], [0, 10, 100]])
    def test_rejects_bad_ladders(self, ladder):
        with pytest.raises(ValueError):
            fit_order(ladder, np.ones((2, len(ladder))), 2)

    def test_all_zero_is_degenerate(self):
        fit = fit_order([10, 100, 1000], np.zeros((5, 3)), 5)
        assert fit.degenerate and math.isnan(fit.fitted_order) and math.isnan(fit.r_squared)

    def test_partial_zero_is_an_error(self):
        with pytest.raises(ValueError, match="m=\\[1000\\]"):
            fit_order([10, 100, 1000], np.array([[1e-3, 1e-4, 0.0]]), 1)


class TestEmVsExact:
    def test_noiseless_order_one(self):
        fit = em_vs_exact_strong_error(OUParams(1.0, 0.0, 0.1), 1.0, [10, 100, 1000, 10_000], 2, SEED)
        assert fit.fitted_order == pytest.approx(1.0, abs=1e-2)

    def test_noisy_order_one(self):
        fit = em_vs_exact_strong_error(OU, 1.0, [10, 100, 1000], 500, SEED)
        assert 0.85 <= fit.fitted_order <= 1.15
        # errors fall by more than their standard errors
        for (e0, s0), (e1, s1) in zip(zip(fit.mean_errors, fit.std_errors), zip(fit.mean_errors[1:], fit.std_errors[1:])):
            assert e0 - e1 > 3 * math.hypot(s0, s1)

    def test_standard_error_scaling(self):
        small = em_vs_exact_strong_error(OU, 1.0, [10, 100, 1000], 500, SEED)
        large = em_vs_exact_strong_error(OU, 1.0, [10, 100, 1000], 1000, SEED)
        for a, b in zip(small.std_errors, large.std_errors):
            assert b / a == pytest.approx(1 / math.sqrt(2), rel=0.2)

    def test_worker_invariance(self):
        a = em_vs_exact_strong_error(OU, 1.0, [10, 100, 1000], 300, SEED, workers=1)
        b = em_vs_exact_strong_error(OU, 1.0, [10, 100, 1000], 300, SEED, workers=3)
        assert a == b


class TestSigmaBarOrder:
    def test_constant_transform_is_degenerate(self):
        fit = sigma_bar_error_order(OU, AbsAffine(0, 0.2), 1.0, [10, 100, 1000], 20, SEED)
        assert fit.degenerate

    def test_order_at_least_half(self):
        fit = sigma_bar_error_order(OU, AbsAffine(1, 0.2), 1.0, [10, 100, 1000], 200, SEED, fine_m=10_000)
        assert fit.fitted_order >= 0.45 and fit.r_squared >= 0.98
        assert fit.hoelder_verified and fit.notes == ()

    def test_fine_grid_default(self):
        fit = sigma_bar_error_order(OU, AbsAffine(1, 0.2), 1.0, [10, 20, 50], 20, SEED)
        same = sigma_bar_error_order(OU, AbsAffine(1, 0.2), 1.0, [10, 20, 50], 20, SEED, fine_m=500)
        assert fit == same

    def test_fine_grid_must_divide(self):
        with pytest.raises(ValueError, match="divide"):
            sigma_bar_error_order(OU, AbsAffine(1, 0.2), 1.0, [10, 30, 100], 5, SEED, fine_m=1000)

    def test_exp_shift_is_flagged(self):
        fit = sigma_bar_error_order(OU, ExpShift(0.2), 1.0, [10, 100, 1000], 50, SEED)
        assert not fit.hoelder_verified
        assert any("Hoelder" in n for n in fit.notes)


class TestPriceOrder:
    def test_constant_transform_is_degenerate(self):
        fit = price_error_order(MKT, OU, AbsAffine(0, 0.2), [10, 100, 1000], 20, SEED)
        assert fit.degenerate

    def test_order(self):
        fit = price_error_order(MKT, OU, AbsAffine(1, 0.2), [10, 100, 1000], 200, SEED, fine_m=10_000)
        assert isinstance(fit, OrderFit)
        assert fit.fitted_order >= 0.45 and fit.n_paths == 200
