# tests/test_config.py

import json
import os
import tempfile
import unittest
from unittest import mock

from config import (
    DEFAULT_CONFIG_PATH,
    SEED_ENV,
    dump_config,
    input_fingerprint,
    load_config,
    load_market_bundle,
    load_market_config,
)
from pricing import CommoditySwap, ForwardContract, Side
from utils import ConfigError


def minimal_config(data_dir):
    return {
        "market": {
            "zero_curve": os.path.join(data_dir, "zc.csv"),
            "forward_curve": os.path.join(data_dir, "fwd.csv"),
        },
        "counterparties": {
            "payer": {
                "name": "bank",
                "cds_quotes": os.path.join(data_dir, "cds.csv"),
                "cir": {"y0": 0.01, "kappa": 0.5, "mu": 0.02, "nu": 0.1},
            }
        },
        "oil": {"k_x": 0.7, "sigma_x": 0.35, "sigma_L": 0.19, "rho_xL": -0.04},
        "product": {"kind": "swap", "maturity": 1.0, "strike": 100.0, "frequency": 4},
        "simulation": {"n_paths": 200, "chunk_size": 100},
    }


class TestConfigLoading(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = self.tmp.name
        for name, text in {
            "zc.csv": "tenor_years,zero_rate\n1,0.03\n5,0.035\n",
            "fwd.csv": "maturity_years,price_usd\n0.25,100\n1,101\n",
            "cds.csv": "maturity_years,spread_bps\n1,150\n2,170\n",
        }.items():
            with open(os.path.join(self.dir, name), "w", encoding="utf-8") as f:
                f.write(text)

    def tearDown(self):
        self.tmp.cleanup()

    def write_config(self, raw, name="config.json"):
        path = os.path.join(self.dir, name)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(raw, f)
        return path

    def test_shipped_config_is_valid(self):
        with mock.patch.dict(os.environ, {}, clear=False):
            os.environ.pop(SEED_ENV, None)
            config, bundle = load_market_config(DEFAULT_CONFIG_PATH)
        self.assertEqual(set(config.counterparties), {"payer", "receiver"})
        self.assertEqual(config.simulation.seed, 20090301)
        self.assertAlmostEqual(float(bundle.cds_quotes["payer"].spreads[-1]), 0.0217)
        self.assertTrue(os.path.isabs(config.market.zero_curve))
        self.assertIsNotNone(bundle.atm_vols)

    def test_defaults_and_products(self):
        config = load_config(self.write_config(minimal_config(self.dir)))
        self.assertEqual(config.simulation.lgd, 0.6)
        self.assertTrue(config.simulation.antithetic)
        product = config.product.to_product()
        self.assertIsInstance(product, CommoditySwap)
        self.assertEqual(product.payment_times.size, 4)
        self.assertIs(config.product.to_product("receiver").side, Side.RECEIVER)

    def test_forward_product(self):
        raw = minimal_config(self.dir)
        raw["product"] = {"kind": "forward", "maturity": 0.75, "strike": 100.0}
        self.assertIsInstance(load_config(self.write_config(raw)).product.to_product(), ForwardContract)

    def test_relative_paths_resolve_against_config_dir(self):
        raw = minimal_config(self.dir)
        raw["market"]["zero_curve"] = "zc.csv"
        raw["output_dir"] = "out"
        config = load_config(self.write_config(raw))
        self.assertEqual(config.market.zero_curve, os.path.join(self.dir, "zc.csv"))
        self.assertEqual(config.output_dir, os.path.join(self.dir, "out"))

    def test_seed_from_environment(self):
        path = self.write_config(minimal_config(self.dir))
        with mock.patch.dict(os.environ, {SEED_ENV: "77"}):
            self.assertEqual(load_config(path).simulation.seed, 77)
        with mock.patch.dict(os.environ, {SEED_ENV: "seventy"}):
            with self.assertRaises(ConfigError):
                load_config(path)

    def test_all_problems_are_reported(self):
        raw = minimal_config(self.dir)
        raw["oil"]["rho_xL"] = 1.5
        raw["simulation"]["lgd"] = -0.1
        raw["simulation"]["n_paths"] = 201
        raw["unknown_key"] = 1
        with self.assertRaises(ConfigError) as ctx:
            load_config(self.write_config(raw))
        text = "\n".join(ctx.exception.problems)
        self.assertIn("oil.rho_xL", text)
        self.assertIn("simulation.lgd", text)
        self.assertIn("unknown_key", text)

    def test_cross_field_problems_are_collected(self):
        raw = minimal_config(self.dir)
        raw["product"]["side"] = "receiver"
        raw["product"]["maturity"] = 1.1
        raw["simulation"]["n_paths"] = 201
        with self.assertRaises(ConfigError) as ctx:
            load_config(self.write_config(raw))
        problems = ctx.exception.problems
        self.assertEqual(len(problems), 3)
        self.assertTrue(any("receiver" in p for p in problems))
        self.assertTrue(any("whole number" in p for p in problems))
        self.assertTrue(any("even" in p for p in problems))

    def test_json_syntax_error_has_position(self):
        path = os.path.join(self.dir, "broken.json")
        with open(path, "w", encoding="utf-8") as f:
            f.write('{\n  "market": {,\n}')
        with self.assertRaises(ConfigError) as ctx:
            load_config(path)
        self.assertIn("broken.json:2:", ctx.exception.problems[0])

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            load_config(os.path.join(self.dir, "absent.json"))

    def test_market_problems_across_files(self):
        raw = minimal_config(self.dir)
        raw["market"]["forward_curve"] = os.path.join(self.dir, "absent.csv")
        raw["counterparties"]["payer"]["cds_quotes"] = os.path.join(self.dir, "absent_cds.csv")
        config = load_config(self.write_config(raw))
        with self.assertRaises(ConfigError) as ctx:
            load_market_bundle(config)
        self.assertEqual(len(ctx.exception.problems), 2)

    def test_dump_and_reload(self):
        config = load_config(self.write_config(minimal_config(self.dir)))
        path = os.path.join(self.dir, "dumped.json")
        dump_config(config, path)
        self.assertEqual(load_config(path), config)

    def test_fingerprint_follows_calibration_inputs(self):
        raw = minimal_config(self.dir)
        base = input_fingerprint(load_config(self.write_config(raw)))
        self.assertEqual(input_fingerprint(load_config(self.write_config(raw, "again.json"))), base)
        more_paths = dict(raw, simulation={"n_paths": 400, "chunk_size": 100})
        self.assertEqual(input_fingerprint(load_config(self.write_config(more_paths, "paths.json"))), base)
        raw["counterparties"]["payer"]["cir"]["nu"] = 0.2
        self.assertNotEqual(input_fingerprint(load_config(self.write_config(raw, "nu.json"))), base)

    def test_fingerprint_reads_market_files(self):
        config = load_config(self.write_config(minimal_config(self.dir)))
        before = input_fingerprint(config)
        with open(os.path.join(self.dir, "cds.csv"), "a", encoding="utf-8") as f:
            f.write("3,190\n")
        self.assertNotEqual(input_fingerprint(config), before)


if __name__ == '__main__':
    unittest.main()
