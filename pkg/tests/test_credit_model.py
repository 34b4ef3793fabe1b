# tests/test_credit_model.py

import inspect
import unittest

import numpy as np

from market import CdsQuoteSet, HazardCurve, ZeroCurve, strip_hazard_curve
from models import (
    NO_DEFAULT,
    CirParams,
    CreditShift,
    calibrate_credit_model,
    cir_transition_moments,
    cir_zcb_price,
    credit_model,
    cumulative_intensity,
    evolve_cir,
    evolve_cir_euler,
    fit_credit_shift,
    model_survival,
    sample_default_time,
    simulate_intensity,
)
from utils import CalibrationError, DomainError

CIR = CirParams(y0=0.01, kappa=0.5, mu=0.02, nu=0.1)
MARKET = HazardCurve([1.0, 3.0, 5.0], [0.03, 0.035, 0.04])
GRID = np.linspace(0.0, 5.0, 21)


def classic_cir_bond(p, t):
    h = np.sqrt(p.kappa ** 2 + 2 * p.nu ** 2)
    growth = np.exp(h * t) - 1.0
    denom = 2 * h + (p.kappa + h) * growth
    a = (2 * h * np.exp((p.kappa + h) * t / 2) / denom) ** (2 * p.kappa * p.mu / p.nu ** 2)
    b = 2 * growth / denom
    return a * np.exp(-b * p.y0)


class TestCirBond(unittest.TestCase):
    def test_matches_textbook_formula(self):
        p = CirParams(y0=0.056, kappa=0.6331, mu=0.0293, nu=0.5945)
        t = np.array([0.5, 1.0, 2.0, 5.0, 10.0])
        np.testing.assert_allclose(cir_zcb_price(p, t), classic_cir_bond(p, t), rtol=1e-12)

    def test_unit_at_zero(self):
        self.assertEqual(cir_zcb_price(CIR, 0.0), 1.0)

    def test_deterministic_limit(self):
        p = CirParams(y0=0.05, kappa=0.8, mu=0.02, nu=1e-7)
        t = np.array([0.5, 2.0, 7.0])
        integral = p.mu * t + (p.y0 - p.mu) * -np.expm1(-p.kappa * t) / p.kappa
        np.testing.assert_allclose(cir_zcb_price(p, t), np.exp(-integral), rtol=1e-7)

    def test_negative_horizon_rejected(self):
        with self.assertRaises(DomainError):
            cir_zcb_price(CIR, -1.0)


class TestCreditShift(unittest.TestCase):
    def test_fit_reproduces_market_survival(self):
        shift = fit_credit_shift(CIR, MARKET, GRID)
        self.assertEqual(shift.psi[0], 0.0)
        np.testing.assert_allclose(model_survival(CIR, shift, GRID), MARKET.survival_probability(GRID), rtol=1e-12)
        self.assertTrue(np.all(np.diff(shift.psi) >= 0.0))

    def test_zero_is_prepended(self):
        shift = fit_credit_shift(CIR, MARKET, np.array([1.0, 2.0]))
        np.testing.assert_array_equal(shift.times, [0.0, 1.0, 2.0])

    def test_calibrated_model_includes_curve_nodes(self):
        model = calibrate_credit_model(CIR, MARKET, np.array([0.0, 0.5, 2.0]))
        for node in MARKET.tenors:
            self.assertIn(node, model.shift.times)
        self.assertAlmostEqual(float(model.survival(5.0)), MARKET.survival_probability(5.0), places=12)

    def test_negative_shift_rejected(self):
        p = CirParams(y0=0.05, kappa=0.5, mu=0.05, nu=0.1)
        low = HazardCurve.flat(0.001)
        with self.assertRaises(CalibrationError) as ctx:
            fit_credit_shift(p, low, GRID)
        self.assertEqual(ctx.exception.interval[0], 0.0)

    def test_negative_shift_accepted_on_request(self):
        p = CirParams(y0=0.05, kappa=0.5, mu=0.05, nu=0.1)
        with self.assertLogs("models.credit_model", level="WARNING"):
            shift = fit_credit_shift(p, HazardCurve.flat(0.001), GRID, allow_negative=True)
        self.assertLess(shift.psi[-1], 0.0)

    def test_with_params_refits(self):
        model = calibrate_credit_model(CIR, MARKET, GRID)
        scaled = model.with_params(CIR.scale_nu(0.5))
        self.assertAlmostEqual(scaled.params.nu, 0.05)
        np.testing.assert_allclose(scaled.survival(GRID), MARKET.survival_probability(GRID), rtol=1e-12)

    def test_shift_must_start_at_zero(self):
        with self.assertRaises(DomainError):
            CreditShift([0.0, 1.0], [0.1, 0.2])


class TestCirSimulation(unittest.TestCase):
    def test_exact_step_moments(self):
        p = CirParams(y0=0.03, kappa=0.6, mu=0.03, nu=0.3)
        rng = np.random.default_rng(3)
        n = 100_000
        y = evolve_cir(p, np.full(n, p.y0), 0.25, rng.random(n))
        mean, var = cir_transition_moments(p, p.y0, 0.25)
        self.assertTrue(np.all(y >= 0.0))
        self.assertLess(abs(y.mean() - mean), 4.0 * np.sqrt(var / n))
        self.assertAlmostEqual(y.var(), float(var), delta=0.05 * float(var))

    def test_step_from_zero(self):
        p = CirParams(y0=0.0, kappa=0.5, mu=0.03, nu=0.2)
        y = evolve_cir(p, np.zeros(5), 0.1, np.array([0.1, 0.3, 0.5, 0.7, 0.9]))
        self.assertTrue(np.all(y >= 0.0))
        self.assertTrue(np.all(np.diff(y) > 0.0))

    def test_tiny_vol_is_deterministic(self):
        p = CirParams(y0=0.05, kappa=0.5, mu=0.02, nu=1e-9)
        y = evolve_cir(p, np.array([0.05, 0.05]), 1.0, np.array([0.01, 0.99]))
        expected = 0.02 + 0.03 * np.exp(-0.5)
        np.testing.assert_allclose(y, expected, rtol=1e-14)

    def test_euler_full_truncation(self):
        y = evolve_cir_euler(CIR, np.array([-0.01]), 0.1, np.array([1.0]))
        # negative state contributes neither drift damping nor diffusion
        self.assertAlmostEqual(float(y[0]), -0.01 + CIR.kappa * CIR.mu * 0.1)

    def test_monte_carlo_survival_matches_market(self):
        times = np.linspace(0.0, 3.0, 37)
        model = calibrate_credit_model(CIR, MARKET, times)
        paths = simulate_intensity(CIR, model.shift, times, 4000, np.random.default_rng(17))
        survival = np.exp(-paths.Lambda[:, -1])
        se = survival.std(ddof=1) / np.sqrt(survival.size)
        self.assertLess(abs(survival.mean() - MARKET.survival_probability(3.0)), 4.0 * se + 2e-4)

    def test_bank_parameters_reprice_the_bank_curve(self):
        bank = CirParams(y0=0.0560, kappa=0.6331, mu=0.0293, nu=0.5945)
        quotes = CdsQuoteSet.from_bps([0.5, 1, 2, 3, 4, 5], [345, 332, 287, 256, 232, 217], recovery=0.4)
        market = strip_hazard_curve(quotes, ZeroCurve.flat(0.03))
        times = np.linspace(0.0, 5.0, 61)
        model = calibrate_credit_model(bank, market, times, allow_negative=True)
        paths = simulate_intensity(bank, model.shift, times, 20_000, np.random.default_rng(29))
        for year in (1, 3, 5):
            with self.subTest(year=year):
                survival = np.exp(-paths.Lambda[:, 12 * year])
                se = survival.std(ddof=1) / np.sqrt(survival.size)
                self.assertLess(abs(survival.mean() - market.survival_probability(float(year))), 3.0 * se + 1e-4)

    def test_unknown_scheme(self):
        with self.assertRaises(DomainError):
            simulate_intensity(CIR, CreditShift.zero(), np.array([0.0, 1.0]), 2, np.random.default_rng(0), "milstein")


class TestModuleExports(unittest.TestCase):
    def test_exports_lead_the_module(self):
        source = inspect.getsource(credit_model)
        self.assertLess(source.index("__all__"), source.index("\ndef "))
        self.assertLess(source.index("__all__"), source.index("\nclass "))
        for name in credit_model.__all__:
            self.assertTrue(hasattr(credit_model, name), name)


class TestDefaultTimes(unittest.TestCase):
    def test_constant_intensity(self):
        times = np.linspace(0.0, 5.0, 11)
        y = np.full((1, times.size), 0.02)
        Lambda = cumulative_intensity(times, y, CreditShift.zero())
        np.testing.assert_allclose(Lambda[0], 0.02 * times, atol=1e-15)

    def test_crossing_is_interpolated(self):
        times = np.linspace(0.0, 5.0, 11)
        Lambda = np.vstack((0.1 * times, 0.1 * times))
        tau = sample_default_time(times, Lambda, np.array([0.23, 0.9]))
        self.assertAlmostEqual(tau[0], 2.3)
        self.assertEqual(tau[1], NO_DEFAULT)


if __name__ == '__main__':
    unittest.main()
