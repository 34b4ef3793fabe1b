# tests/test_market_data.py

import os
import tempfile
import unittest

import numpy as np

from fileio import load_cds_quotes, load_forward_curve, load_zero_curve, read_market_table
from fileio.file_manager import CDS_COLUMNS
from market import (
    CdsQuoteSet,
    CdsSchedule,
    ForwardCurveQuotes,
    HazardCurve,
    ZeroCurve,
    cds_model_price,
    cds_par_spread,
    strip_hazard_curve,
)
from utils import CalibrationError, ConfigError, DomainError


class TestCurves(unittest.TestCase):
    def test_flat_discount_factor(self):
        curve = ZeroCurve.flat(0.03)
        self.assertAlmostEqual(curve.discount_factor(2.0), np.exp(-0.06), places=14)
        self.assertEqual(curve.discount_factor(0.0), 1.0)

    def test_zero_rate_is_flat_outside_nodes(self):
        curve = ZeroCurve([1.0, 5.0], [0.02, 0.04])
        self.assertAlmostEqual(curve.zero_rate(0.5), 0.02)
        self.assertAlmostEqual(curve.zero_rate(3.0), 0.03)
        self.assertAlmostEqual(curve.zero_rate(10.0), 0.04)

    def test_forward_discount(self):
        curve = ZeroCurve([1.0, 5.0], [0.02, 0.04])
        self.assertAlmostEqual(
            float(curve.forward_discount(1.0, 3.0)), curve.discount_factor(3.0) / curve.discount_factor(1.0)
        )

    def test_piecewise_hazard_survival(self):
        h = HazardCurve([1.0, 3.0], [0.01, 0.03])
        self.assertAlmostEqual(h.survival_probability(1.0), np.exp(-0.01))
        self.assertAlmostEqual(h.survival_probability(2.0), np.exp(-0.04))
        # flat extension of the last rate
        self.assertAlmostEqual(h.survival_probability(4.0), np.exp(-0.10))
        self.assertAlmostEqual(float(h.default_probability(1.0, 2.0)), np.exp(-0.01) - np.exp(-0.04))

    def test_negative_time_rejected(self):
        with self.assertRaises(DomainError):
            ZeroCurve.flat(0.03).discount_factor(-1.0)

    def test_unsorted_tenors_rejected(self):
        with self.assertRaises(DomainError):
            ZeroCurve([2.0, 1.0], [0.01, 0.02])
        with self.assertRaises(DomainError):
            HazardCurve([1.0], [-0.01])

    def test_forward_quotes_must_be_positive(self):
        with self.assertRaises(DomainError):
            ForwardCurveQuotes([1.0, 2.0], [100.0, 0.0])

    def test_cds_quotes_in_bps(self):
        quotes = CdsQuoteSet.from_bps([1.0, 5.0], [100.0, 150.0], recovery=0.4)
        np.testing.assert_allclose(quotes.spreads, [0.01, 0.015])
        self.assertAlmostEqual(quotes.lgd, 0.6)


class TestCdsBootstrap(unittest.TestCase):
    def setUp(self):
        self.curve = ZeroCurve([1.0, 10.0], [0.03, 0.04])

    def test_regular_schedule_has_front_stub(self):
        schedule = CdsSchedule.regular(1.1, 4)
        np.testing.assert_allclose(schedule.payment_times, [0.1, 0.35, 0.6, 0.85, 1.1])
        self.assertAlmostEqual(schedule.accruals[0], 0.1)

    def test_flat_hazard_is_recovered(self):
        flat = HazardCurve.flat(0.02)
        maturities = [1.0, 3.0, 5.0]
        spreads = [cds_par_spread(flat, self.curve, m, 0.6) for m in maturities]
        stripped = strip_hazard_curve(CdsQuoteSet(maturities, spreads, recovery=0.4), self.curve)
        np.testing.assert_allclose(stripped.hazard_rates, 0.02, atol=1e-9)

    def test_quotes_reprice_to_zero(self):
        quotes = CdsQuoteSet.from_bps([0.5, 1, 2, 3, 4, 5], [345, 332, 287, 256, 232, 217], recovery=0.4)
        stripped = strip_hazard_curve(quotes, self.curve)
        for maturity, spread in zip(quotes.maturities, quotes.spreads):
            value = cds_model_price(stripped, self.curve, spread, quotes.lgd, CdsSchedule.regular(maturity))
            self.assertLess(abs(value), 1e-10)

    def test_zero_spread_gives_zero_hazard(self):
        stripped = strip_hazard_curve(CdsQuoteSet([1.0, 2.0], [0.0, 0.0]), self.curve)
        np.testing.assert_array_equal(stripped.hazard_rates, [0.0, 0.0])

    def test_arbitrageable_quotes_rejected(self):
        quotes = CdsQuoteSet.from_bps([0.5, 1.0], [500.0, 50.0])
        with self.assertRaises(CalibrationError) as ctx:
            strip_hazard_curve(quotes, self.curve)
        self.assertEqual(ctx.exception.maturity, 1.0)

    def test_credit_triangle(self):
        quotes = CdsQuoteSet.from_bps([1.0, 3.0, 5.0], [100.0, 100.0, 100.0], recovery=0.4)
        stripped = strip_hazard_curve(quotes, self.curve)
        np.testing.assert_allclose(stripped.hazard_rates, 0.01 / 0.6, rtol=0.01)

    def test_doubling_spreads_doubles_hazards(self):
        flat = [
            strip_hazard_curve(CdsQuoteSet.from_bps([1.0, 5.0], [bps, bps], recovery=0.4), self.curve)
            for bps in (100.0, 200.0)
        ]
        np.testing.assert_allclose(flat[1].hazard_rates, 2.0 * flat[0].hazard_rates, rtol=0.01)
        maturities = [0.5, 1, 2, 3, 4, 5]
        spreads = np.array([345, 332, 287, 256, 232, 217], dtype=float)
        base = strip_hazard_curve(CdsQuoteSet.from_bps(maturities, spreads, recovery=0.4), self.curve)
        doubled = strip_hazard_curve(CdsQuoteSet.from_bps(maturities, 2.0 * spreads, recovery=0.4), self.curve)
        # average hazard to 5y
        ratio = np.log(doubled.survival_probability(5.0)) / np.log(base.survival_probability(5.0))
        self.assertAlmostEqual(ratio, 2.0, delta=0.06)


class TestMarketFiles(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, name, text):
        path = os.path.join(self.tmp.name, name)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        return path

    def test_load_zero_curve(self):
        path = self.write("zc.csv", "tenor_years,zero_rate\n1,0.02\n5,0.03\n")
        curve = load_zero_curve(path)
        np.testing.assert_allclose(curve.zero_rates, [0.02, 0.03])

    def test_comment_lines_are_skipped(self):
        path = self.write("fwd.csv", "# illustrative\nmaturity_years,price_usd\n1,100\n2,101\n")
        quotes = load_forward_curve(path)
        np.testing.assert_allclose(quotes.prices, [100.0, 101.0])

    def test_cds_spreads_converted_from_bps(self):
        path = self.write("cds.csv", "maturity_years,spread_bps\n1,100\n5,150\n")
        quotes = load_cds_quotes(path, recovery=0.35)
        np.testing.assert_allclose(quotes.spreads, [0.01, 0.015])
        self.assertAlmostEqual(quotes.recovery, 0.35)

    def test_every_bad_cell_is_reported(self):
        path = self.write("cds.csv", "maturity_years,spread_bps\n1,100\n2,abc\n-3,120\n")
        with self.assertRaises(ConfigError) as ctx:
            read_market_table(path, CDS_COLUMNS, positive=("maturity_years",))
        problems = ctx.exception.problems
        self.assertEqual(len(problems), 2)
        self.assertTrue(any(":3:" in p and "spread_bps" in p for p in problems))
        self.assertTrue(any(":4:" in p and "maturity_years" in p for p in problems))

    def test_missing_column(self):
        path = self.write("zc.csv", "tenor,rate\n1,0.02\n")
        with self.assertRaises(ConfigError) as ctx:
            load_zero_curve(path)
        self.assertIn("tenor_years", ctx.exception.problems[0])

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            load_zero_curve(os.path.join(self.tmp.name, "absent.csv"))

    def test_domain_error_becomes_config_error(self):
        path = self.write("zc.csv", "tenor_years,zero_rate\n5,0.02\n1,0.03\n")
        with self.assertRaises(ConfigError):
            load_zero_curve(path)


if __name__ == '__main__':
    unittest.main()
