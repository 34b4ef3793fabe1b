# main.py

import argparse
import asyncio
import logging
import os
import sys
from dataclasses import replace
from typing import Dict, List, Optional, Sequence

import pandas as pd
from pydantic import ValidationError

from config import MarketBundle, RunConfig, input_fingerprint, load_market_config
from config.config_loader import SimulationSection
from docs import VOL_TERM_STRUCTURE, render_deviation_report, render_report, vol_term_structure_frame
from fileio import (
    frame_to_csv,
    load_reference_cva,
    load_state,
    read_results_csv,
    results_to_csv,
    state_fingerprint,
    state_to_json,
    write_files_async,
)
from market import cds_par_spread, strip_hazard_curve
from models import calibrate_credit_model, calibrate_oil_model, calibrate_oil_params
from pricing import (
    CalibratedMarket,
    CommoditySwap,
    CvaResult,
    Side,
    SweepSpec,
    build_scenario,
    cva_independent,
    cva_upper_bound,
    fair_strike,
    product_annuity,
    product_fixed_leg,
    residual_npv,
    run_cva_async,
    run_sweep,
)
from pricing.cva_engine import bucket_dates
from pricing.scenarios import anchor_forward_curve
from utils import CalibrationError, ConfigError, CorrelationError, CvaError, SimulationError, configure_logging

logger = logging.getLogger("crcva")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CALIBRATION = 3
EXIT_SIMULATION = 4

STATE_FILE = "calibrated_state.json"
PRICES_FILE = "prices.csv"
CVA_FILE = "cva.csv"
SWEEP_FILE = "sweep_results.csv"
VOL_FILE = f"{VOL_TERM_STRUCTURE}.csv"


def build_calibrated_market(config: RunConfig, bundle: MarketBundle) -> CalibratedMarket:
    """
    Calibrates the oil model and every counterparty's CIR++ model.

    Parameters:
        config (RunConfig): Validated configuration.
        bundle (MarketBundle): Market data.

    Returns:
        CalibratedMarket: Models ready for pricing.
    """
    curve = bundle.zero_curve
    params = config.oil.to_params()
    if config.oil.calibrate_to_atm_vols:
        params = calibrate_oil_params(bundle.atm_vols, params)
    product = config.product.to_product()
    quotes = bundle.forward_quotes
    if config.market.anchor_forward_to_strike and isinstance(product, CommoditySwap):
        quotes = anchor_forward_curve(quotes, params, product, curve)
    oil_model = calibrate_oil_model(params, quotes)

    grid = config.simulation.to_config().time_grid(product)
    counterparties = {}
    for side, section in config.counterparties.items():
        quotes_cds = bundle.cds_quotes[side]
        hazard = strip_hazard_curve(quotes_cds, curve)
        for maturity, spread in zip(quotes_cds.maturities, quotes_cds.spreads):
            repriced = cds_par_spread(hazard, curve, maturity, quotes_cds.lgd, quotes_cds.payment_frequency)
            logger.debug(f"{section.name} {maturity}y: quoted {spread * 1e4:.4f}bp, repriced {repriced * 1e4:.4f}bp")
        counterparties[side] = calibrate_credit_model(
            section.cir.to_params(), hazard, grid, config.allow_negative_shift
        )
        logger.info(f"Calibrated {section.name} (facing the {side}).")
    return CalibratedMarket(curve, quotes, oil_model, counterparties, config.allow_negative_shift)


def apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    """
    Folds command-line flags into the configuration.

    Raises:
        ConfigError: A flag value fails validation.
    """
    simulation = config.simulation.model_dump()
    for flag, key in (
        ("seed", "seed"),
        ("paths", "n_paths"),
        ("lgd", "lgd"),
        ("workers", "n_workers"),
        ("estimator", "estimator"),
        ("cir_scheme", "cir_scheme"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            simulation[key] = value
    updates = {}
    try:
        updates["simulation"] = SimulationSection(**simulation)
    except ValidationError as ve:
        raise ConfigError([f"simulation.{e['loc'][0]}: {e['msg']}" for e in ve.errors()])
    if getattr(args, "out", None):
        updates["output_dir"] = os.path.abspath(args.out)
    if getattr(args, "side", None):
        updates["product"] = config.product.model_copy(update={"side": args.side})
    return config.model_copy(update=updates)


def _load(args: argparse.Namespace):
    config, bundle = load_market_config(args.config)
    return apply_overrides(config, args), bundle


def _market(config: RunConfig, bundle: MarketBundle) -> CalibratedMarket:
    """
    Reuses calibrated_state.json from the output directory when it was built from the
    current inputs; a state from other inputs is ignored and the market recalibrated.
    """
    state_path = os.path.join(config.output_dir, STATE_FILE)
    if os.path.isfile(state_path):
        if state_fingerprint(state_path) == input_fingerprint(config):
            logger.info(f"Using calibrated state '{state_path}'.")
            return load_state(state_path)
        logger.warning(f"Calibrated state '{state_path}' was built from other inputs; recalibrating.")
    return build_calibrated_market(config, bundle)


def report_files(
    config: RunConfig, market: CalibratedMarket, results: Sequence[CvaResult], fixed_leg: float
) -> Dict[str, str]:
    """Report tables, the model vol term structure and, with a reference table configured, the deviation report."""
    vol_frame = vol_term_structure_frame(market.oil_model.params, config.sweep.oil_vol_mults)
    files = render_report(results, fixed_leg, config.output_dir, config.oil.reference_spot_vol, vol_frame)
    if config.reference_cva and files:
        reference = load_reference_cva(config.reference_cva)
        files.update(render_deviation_report(results, reference, config.simulation.lgd, config.output_dir))
    return files


async def cmd_calibrate(args: argparse.Namespace) -> int:
    config, bundle = _load(args)
    market = build_calibrated_market(config, bundle)
    vol_frame = vol_term_structure_frame(market.oil_model.params, config.sweep.oil_vol_mults)
    ok = await write_files_async(
        {
            os.path.join(config.output_dir, STATE_FILE): state_to_json(market, input_fingerprint(config)),
            os.path.join(config.output_dir, VOL_FILE): frame_to_csv(vol_frame),
        }
    )
    return EXIT_OK if ok else EXIT_CONFIG


async def cmd_price(args: argparse.Namespace) -> int:
    config, bundle = _load(args)
    market = _market(config, bundle)
    oil = market.oil_model
    sim = config.simulation.to_config()
    rows = []
    for side in (Side.PAYER, Side.RECEIVER):
        product = config.product.to_product(side.value)
        grid = bucket_dates(product, sim.time_grid(product))
        row = {
            "product": config.product.kind,
            "side": side.value,
            "maturity": product.maturity,
            "strike": product.strike,
            "value": residual_npv(product, oil, oil.initial_state, market.curve),
            "annuity": product_annuity(product, market.curve),
            "fixed_leg": product_fixed_leg(product, market.curve),
            "fair_strike": (
                fair_strike(product, oil, oil.initial_state, market.curve)
                if isinstance(product, CommoditySwap)
                else oil.forward(product.maturity)
            ),
            "cva_independent": float("nan"),
            "cva_upper_bound": cva_upper_bound(product, grid, sim.lgd, oil, market.curve),
        }
        if side.value in market.counterparties:
            hazard = market.counterparty(side).market
            row["cva_independent"] = cva_independent(product, grid, hazard, sim.lgd, oil, market.curve)
        rows.append(row)
    ok = await write_files_async({os.path.join(config.output_dir, PRICES_FILE): frame_to_csv(pd.DataFrame(rows))})
    return EXIT_OK if ok else EXIT_CONFIG


async def cmd_cva(args: argparse.Namespace) -> int:
    config, bundle = _load(args)
    market = _market(config, bundle)
    product = config.product.to_product()
    scenario = build_scenario(
        market, product, args.rho_bar, args.oil_vol_mult, args.cir_vol_mult, config.sweep.allow_negative_shift
    )
    result = await run_cva_async(
        scenario.product,
        scenario.oil_model,
        scenario.credit_model,
        market.curve,
        scenario.corr,
        config.simulation.to_config(),
    )
    result = replace(
        result,
        oil_vol_mult=args.oil_vol_mult,
        cir_vol_mult=args.cir_vol_mult,
        scenario_id=scenario.scenario_id,
    )
    ok = await write_files_async({os.path.join(config.output_dir, CVA_FILE): results_to_csv([result])})
    return EXIT_OK if ok else EXIT_CONFIG


def sweep_specs(config: RunConfig, args: argparse.Namespace) -> List[SweepSpec]:
    """Credit-vol and oil-vol grids; --side narrows both to one side."""
    specs = [config.sweep.to_spec(credit_grid=True), config.sweep.to_spec(credit_grid=False)]
    if getattr(args, "side", None):
        specs = [replace(s, sides=(args.side,)) for s in specs]
    return specs


def _dedupe(results: Sequence[CvaResult]) -> List[CvaResult]:
    seen, unique = set(), []
    for r in results:
        if r.scenario_id not in seen:
            seen.add(r.scenario_id)
            unique.append(r)
    return unique


async def cmd_sweep(args: argparse.Namespace) -> int:
    config, bundle = _load(args)
    market = _market(config, bundle)
    product = config.product.to_product()
    sim = config.simulation.to_config()
    results: List[CvaResult] = []
    for spec in sweep_specs(config, args):
        results.extend(await asyncio.to_thread(run_sweep, market, product, spec, sim))
    results = _dedupe(results)
    fixed_leg = product_fixed_leg(product, market.curve)
    files = {os.path.join(config.output_dir, SWEEP_FILE): results_to_csv(results)}
    files.update(report_files(config, market, results, fixed_leg))
    ok = await write_files_async(files)
    failed = sum(not r.ok for r in results)
    if failed:
        logger.warning(f"{failed} sweep cells failed; see the status column.")
    return EXIT_OK if ok else EXIT_CONFIG


async def cmd_report(args: argparse.Namespace) -> int:
    config, bundle = _load(args)
    source = args.results or os.path.join(config.output_dir, SWEEP_FILE)
    results = read_results_csv(source)
    market = _market(config, bundle)
    fixed_leg = product_fixed_leg(config.product.to_product(), market.curve)
    files = report_files(config, market, results, fixed_leg)
    ok = await write_files_async(files) if files else False
    return EXIT_OK if ok else EXIT_CONFIG


COMMANDS = {
    "calibrate": cmd_calibrate,
    "price": cmd_price,
    "cva": cmd_cva,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=os.path.join("config", "config.json"), help="run configuration (JSON)")
    common.add_argument("--seed", type=int, help="root seed (default: config, CRCVA_SEED, then a fixed constant)")
    common.add_argument("--paths", type=int, help="number of Monte Carlo paths")
    common.add_argument("--lgd", type=float, help="loss given default")
    common.add_argument("--side", choices=[s.value for s in Side], help="payer or receiver")
    common.add_argument("--rho-bar", type=float, default=0.0, help="credit/commodity correlation")
    common.add_argument("--oil-vol-mult", type=float, default=1.0, help="multiplier on sigma_x and sigma_L")
    common.add_argument("--cir-vol-mult", type=float, default=1.0, help="multiplier on the intensity vol nu")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, help="concurrent path chunks")
    common.add_argument("--estimator", choices=["intensity", "indicator"], help="CVA estimator")
    common.add_argument("--cir-scheme", choices=["exact", "euler"], help="CIR discretization")
    common.add_argument("--log-level", default="INFO", help="logging level")

    parser = argparse.ArgumentParser(prog="crcva", description="Counterparty-risk CVA for commodity forwards and swaps.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("calibrate", parents=[common], help="calibrate oil and credit models")
    sub.add_parser("price", parents=[common], help="default-free prices and independent-case CVA")
    sub.add_parser("cva", parents=[common], help="CVA of one scenario")
    sub.add_parser("sweep", parents=[common], help="CVA over the correlation and volatility grids")
    report = sub.add_parser("report", parents=[common], help="render report tables from sweep results")
    report.add_argument("--results", help="results CSV (default: <out>/sweep_results.csv)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Main entry point for crcva.

    Returns:
        int: 0 success, 2 configuration error, 3 calibration failure, 4 simulation error.
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return asyncio.run(COMMANDS[args.command](args))
    except ConfigError as e:
        for problem in e.problems:
            logger.error(f"Configuration error: {problem}")
        return EXIT_CONFIG
    except (CalibrationError, CorrelationError) as e:
        logger.error(f"Calibration failure: {e}")
        return EXIT_CALIBRATION
    except SimulationError as e:
        logger.error(f"Simulation error: {e}")
        return EXIT_SIMULATION
    except CvaError as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_CONFIG
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
