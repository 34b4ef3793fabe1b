# tests/test_pricers.py

import unittest

import numpy as np

from market import ForwardCurveQuotes, HazardCurve, ZeroCurve
from models import OilParams, OilState, calibrate_oil_model, transition_moments
from pricing import (
    CommoditySwap,
    ForwardContract,
    Side,
    adjusted_strike,
    annuity,
    bucket_default_probabilities,
    cva_independent,
    cva_upper_bound,
    exposure_strip,
    fair_strike,
    fixed_leg_value,
    forward_value,
    option_on_forward,
    residual_npv,
    swap_exposure_strip,
    swap_value,
    with_side,
)
from pricing.scenarios import anchor_forward_curve
from utils import DomainError

PARAMS = OilParams(k_x=0.7170, sigma_x=0.3522, sigma_L=0.19, rho_xL=-0.0392)
QUOTES = ForwardCurveQuotes([0.25, 0.5, 1.0, 2.0, 3.0], [100.0, 101.0, 102.0, 103.5, 104.5])
CURVE = ZeroCurve([1.0, 5.0], [0.03, 0.04])


def sample_states(model, t, n, seed):
    mean, cov = transition_moments(model.params, 0.0, t, model.x0, model.L0)
    draws = np.random.default_rng(seed).multivariate_normal(mean, cov, size=n)
    return OilState(draws[:, 0], draws[:, 1], t)


class TestProducts(unittest.TestCase):
    def test_regular_swap_schedule(self):
        swap = CommoditySwap.regular(1.0, 100.0, frequency=12)
        self.assertEqual(swap.payment_times.size, 12)
        self.assertAlmostEqual(swap.maturity, 1.0)
        # payments strictly after the query date
        self.assertEqual(int(swap.remaining(swap.payment_times[2]).sum()), 9)

    def test_invalid_products(self):
        with self.assertRaises(DomainError):
            ForwardContract(0.0, 100.0)
        with self.assertRaises(DomainError):
            CommoditySwap([0.5, 0.25], [1.0, 1.0], 100.0)
        with self.assertRaises(ValueError):
            CommoditySwap.regular(1.05, 100.0, frequency=12)

    def test_with_side(self):
        swap = CommoditySwap.regular(1.0, 100.0)
        flipped = with_side(swap, Side.RECEIVER)
        self.assertIs(flipped.side, Side.RECEIVER)
        np.testing.assert_array_equal(flipped.payment_times, swap.payment_times)
        self.assertIs(with_side(ForwardContract(1.0, 100.0), "receiver").side, Side.RECEIVER)


class TestDefaultFreeValues(unittest.TestCase):
    def setUp(self):
        self.model = calibrate_oil_model(PARAMS, QUOTES)
        self.state = self.model.initial_state

    def test_forward_value_at_inception(self):
        payer = ForwardContract(2.0, 100.0, Side.PAYER, notional=10.0)
        expected = 10.0 * CURVE.discount_factor(2.0) * (103.5 - 100.0)
        self.assertAlmostEqual(forward_value(payer, self.model, self.state, CURVE), expected, places=10)
        receiver = with_side(payer, Side.RECEIVER)
        self.assertAlmostEqual(forward_value(receiver, self.model, self.state, CURVE), -expected, places=10)

    def test_forward_after_maturity_rejected(self):
        with self.assertRaises(DomainError):
            forward_value(ForwardContract(1.0, 100.0), self.model, OilState(0.0, self.model.L0, 1.5), CURVE)

    def test_swap_at_fair_strike_is_worth_zero(self):
        swap = CommoditySwap.regular(3.0, 100.0)
        k_star = fair_strike(swap, self.model, self.state, CURVE)
        self.assertAlmostEqual(swap_value(swap.with_strike(k_star), self.model, self.state, CURVE), 0.0, places=10)

    def test_annuity_and_fixed_leg(self):
        swap = CommoditySwap.regular(2.0, 100.0, frequency=4)
        expected = sum(CURVE.discount_factor(t) for t in swap.payment_times)
        self.assertAlmostEqual(annuity(swap, CURVE), expected, places=12)
        self.assertAlmostEqual(fixed_leg_value(swap, CURVE), 100.0 * expected, places=10)

    def test_residual_npv_excludes_paid_dates(self):
        swap = CommoditySwap.regular(1.0, 100.0)
        state = OilState(0.0, self.model.L0, swap.maturity)
        self.assertEqual(residual_npv(swap, self.model, state, CURVE), 0.0)

    def test_anchoring_sets_fair_strike(self):
        swap = CommoditySwap.regular(3.0, 126.0)
        anchored = anchor_forward_curve(QUOTES, PARAMS, swap, CURVE)
        model = calibrate_oil_model(PARAMS, anchored)
        self.assertAlmostEqual(fair_strike(swap, model, model.initial_state, CURVE), 126.0, places=9)


class TestOptionOnForward(unittest.TestCase):
    def setUp(self):
        self.model = calibrate_oil_model(PARAMS, QUOTES)
        self.state = self.model.initial_state

    def test_parity(self):
        T, T_j, K = 3.0, 1.0, 102.0
        payer = option_on_forward(self.model, self.state, T, T_j, K, CURVE, Side.PAYER)
        receiver = option_on_forward(self.model, self.state, T, T_j, K, CURVE, Side.RECEIVER)
        forward = CURVE.discount_factor(T) * (self.model.forward(T) - K)
        self.assertAlmostEqual(payer - receiver, forward, places=9)

    def test_immediate_exercise_is_intrinsic(self):
        value = option_on_forward(self.model, self.state, 2.0, 0.0, 100.0, CURVE, Side.PAYER)
        self.assertAlmostEqual(value, CURVE.discount_factor(2.0) * (103.5 - 100.0), places=10)
        value = option_on_forward(self.model, self.state, 2.0, 0.0, 100.0, CURVE, Side.RECEIVER)
        self.assertEqual(value, 0.0)

    def test_matches_monte_carlo(self):
        T, T_j, K = 3.0, 1.5, 104.0
        states = sample_states(self.model, T_j, 200_000, seed=21)
        fwd = self.model.forward(T, states)
        payoff = CURVE.discount_factor(T) * np.maximum(fwd - K, 0.0)
        se = payoff.std(ddof=1) / np.sqrt(payoff.size)
        closed = option_on_forward(self.model, self.state, T, T_j, K, CURVE, Side.PAYER)
        self.assertLess(abs(payoff.mean() - closed), 4.0 * se)

    def test_bad_dates(self):
        with self.assertRaises(DomainError):
            option_on_forward(self.model, self.state, 1.0, 2.0, 100.0, CURVE)
        with self.assertRaises(DomainError):
            option_on_forward(self.model, self.state, 2.0, 1.0, 0.0, CURVE)


class TestExposureStrip(unittest.TestCase):
    def setUp(self):
        self.model = calibrate_oil_model(PARAMS, QUOTES)

    def test_single_payment_swap_equals_option(self):
        swap = CommoditySwap([2.0], [1.0], 103.0, Side.PAYER)
        strip = swap_exposure_strip(swap, self.model, CURVE, np.array([0.5, 1.0, 1.5]))
        for value, t_j in zip(strip, (0.5, 1.0, 1.5)):
            option = option_on_forward(self.model, self.model.initial_state, 2.0, t_j, 103.0, CURVE, Side.PAYER)
            self.assertAlmostEqual(value, option, places=8)

    def test_swap_strip_matches_monte_carlo(self):
        swap = CommoditySwap.regular(2.0, 102.0, Side.RECEIVER, frequency=4)
        T_j = 0.75
        strip = exposure_strip(swap, self.model, CURVE, np.array([T_j]))
        states = sample_states(self.model, T_j, 200_000, seed=8)
        exposure = CURVE.discount_factor(T_j) * np.maximum(swap_value(swap, self.model, states, CURVE), 0.0)
        se = exposure.std(ddof=1) / np.sqrt(exposure.size)
        self.assertLess(abs(exposure.mean() - strip[0]), 4.0 * se)

    def test_frozen_short_factor(self):
        params = OilParams(k_x=0.7, sigma_x=0.0, sigma_L=0.25, rho_xL=0.0)
        model = calibrate_oil_model(params, QUOTES)
        swap = CommoditySwap([2.0], [1.0], 103.0)
        strip = exposure_strip(swap, model, CURVE, np.array([1.0]))
        option = option_on_forward(model, model.initial_state, 2.0, 1.0, 103.0, CURVE)
        self.assertAlmostEqual(strip[0], option, places=8)

    def test_forward_strip_grows_with_date(self):
        fwd = ForwardContract(1.0, 90.0, Side.PAYER, notional=2.0)
        strip = exposure_strip(fwd, self.model, CURVE, np.array([0.25, 0.5, 1.0]))
        intrinsic = 2.0 * CURVE.discount_factor(1.0) * (self.model.forward(1.0) - 90.0)
        self.assertTrue(np.all(np.diff(strip) > 0.0))
        self.assertGreater(strip[0], intrinsic)


class TestIndependentCva(unittest.TestCase):
    def setUp(self):
        self.model = calibrate_oil_model(PARAMS, QUOTES)
        self.hazard = HazardCurve([1.0, 3.0], [0.02, 0.03])

    def test_bucket_probabilities_sum_to_default_probability(self):
        grid = np.array([0.5, 1.0, 2.0, 3.0])
        pd = bucket_default_probabilities(self.hazard, grid)
        self.assertAlmostEqual(pd.sum(), 1.0 - self.hazard.survival_probability(3.0), places=14)

    def test_zero_hazard_gives_zero(self):
        swap = CommoditySwap.regular(2.0, 102.0)
        cva = cva_independent(swap, swap.payment_times, HazardCurve.flat(0.0), 0.6, self.model, CURVE)
        self.assertEqual(cva, 0.0)

    def test_upper_bound_dominates(self):
        for product in (CommoditySwap.regular(2.0, 102.0), ForwardContract(2.0, 102.0, Side.RECEIVER)):
            grid = product.payment_times if isinstance(product, CommoditySwap) else np.linspace(1 / 12, 2.0, 24)
            cva = cva_independent(product, grid, self.hazard, 0.6, self.model, CURVE)
            self.assertGreater(cva, 0.0)
            self.assertLessEqual(cva, cva_upper_bound(product, grid, 0.6, self.model, CURVE))

    def test_forward_grid_must_end_at_maturity(self):
        with self.assertRaises(DomainError):
            cva_independent(ForwardContract(2.0, 100.0), np.array([0.5, 1.0]), self.hazard, 0.6, self.model, CURVE)

    def test_adjusted_strike(self):
        self.assertAlmostEqual(adjusted_strike(126.0, 63.42, 54.0, Side.PAYER), 126.0 - 63.42 / 54.0)
        self.assertAlmostEqual(adjusted_strike(126.0, 29.16, 54.0, Side.RECEIVER), 126.0 + 29.16 / 54.0)
        with self.assertRaises(DomainError):
            adjusted_strike(126.0, 1.0, 0.0, Side.PAYER)

    def test_adjusted_strikes_of_the_five_year_swap(self):
        swap_annuity = 6852.35 / 126.0
        self.assertAlmostEqual(adjusted_strike(126.0, 63.49, swap_annuity, Side.PAYER), 124.83, delta=0.02)
        self.assertAlmostEqual(adjusted_strike(126.0, 27.99, swap_annuity, Side.RECEIVER), 126.51, delta=0.02)


if __name__ == '__main__':
    unittest.main()
