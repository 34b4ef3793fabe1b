# fileio/file_manager.py

import asyncio
import io
import json
import logging
import os
from typing import Dict, List, Mapping, Optional, Sequence

import aiofiles
import numpy as np
import pandas as pd

from market.curves import AtmVolQuotes, CdsQuoteSet, ForwardCurveQuotes, HazardCurve, ZeroCurve
from models.credit_model import CirParams, CreditModel, CreditShift
from models.oil_model import OilModel, OilParams, OilShift
from pricing.cva_engine import RESULT_COLUMNS, CvaResult
from pricing.pricers import Side
from pricing.scenarios import CalibratedMarket
from utils.errors import ConfigError, CvaError, DomainError

logger = logging.getLogger(__name__)

ZERO_CURVE_COLUMNS = ("tenor_years", "zero_rate")
CDS_COLUMNS = ("maturity_years", "spread_bps")
FORWARD_COLUMNS = ("maturity_years", "price_usd")
ATM_VOL_COLUMNS = ("expiry_years", "vol")
REFERENCE_CVA_COLUMNS = ("side", "kind", "rho_bar", "multiplier", "cva_usd")
REFERENCE_KINDS = ("credit", "oil")
STATE_VERSION = 1


def read_market_table(
    file_path: str,
    columns: Sequence[str],
    positive: Sequence[str] = (),
    nonnegative: Sequence[str] = (),
) -> pd.DataFrame:
    """
    Reads a market CSV with a header and checks the required numeric columns.

    Parameters:
        file_path (str): CSV path.
        columns (Sequence[str]): Required column names, in the order they are used.
        positive (Sequence[str]): Columns whose values must be > 0.
        nonnegative (Sequence[str]): Columns whose values must be >= 0.

    Returns:
        pd.DataFrame: The required columns as float64.

    Raises:
        ConfigError: Every problem found in the file (missing file, missing columns, bad cells).
    """
    if not os.path.isfile(file_path):
        raise ConfigError([f"{file_path}: file not found"])
    try:
        frame = pd.read_csv(file_path, comment="#", skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ConfigError([f"{file_path}: cannot parse CSV ({e})"])
    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ConfigError([f"{file_path}: missing column(s) {', '.join(missing)}"])
    problems = []
    out = pd.DataFrame(index=frame.index)
    for column in columns:
        values = pd.to_numeric(frame[column], errors="coerce")
        # +2: header line and 1-based numbering
        for row in np.flatnonzero(values.isna().to_numpy()):
            problems.append(f"{file_path}:{row + 2}: field '{column}' is not a number ({frame[column].iloc[row]!r})")
        out[column] = values.astype(float)
        if column in positive or column in nonnegative:
            bad = values <= 0.0 if column in positive else values < 0.0
            bound = "positive" if column in positive else "nonnegative"
            for row in np.flatnonzero(bad.to_numpy()):
                problems.append(f"{file_path}:{row + 2}: field '{column}' must be {bound}, got {values.iloc[row]}")
    if frame.empty:
        problems.append(f"{file_path}: no data rows")
    if problems:
        raise ConfigError(problems)
    logger.debug(f"Read {len(out)} rows from '{file_path}'.")
    return out


def _build(file_path: str, factory, *args, **kwargs):
    try:
        return factory(*args, **kwargs)
    except DomainError as e:
        raise ConfigError([f"{file_path}: {e}"])


def load_zero_curve(file_path: str) -> ZeroCurve:
    frame = read_market_table(file_path, ZERO_CURVE_COLUMNS, positive=("tenor_years",))
    return _build(file_path, ZeroCurve, frame["tenor_years"].to_numpy(), frame["zero_rate"].to_numpy())


def load_cds_quotes(file_path: str, recovery: float = 0.4, payment_frequency: int = 4) -> CdsQuoteSet:
    frame = read_market_table(file_path, CDS_COLUMNS, positive=("maturity_years",), nonnegative=("spread_bps",))
    return _build(
        file_path,
        CdsQuoteSet.from_bps,
        frame["maturity_years"].to_numpy(),
        frame["spread_bps"].to_numpy(),
        recovery=recovery,
        payment_frequency=payment_frequency,
    )


def load_forward_curve(file_path: str) -> ForwardCurveQuotes:
    frame = read_market_table(file_path, FORWARD_COLUMNS, positive=FORWARD_COLUMNS)
    return _build(file_path, ForwardCurveQuotes, frame["maturity_years"].to_numpy(), frame["price_usd"].to_numpy())


def load_atm_vols(file_path: str) -> AtmVolQuotes:
    frame = read_market_table(file_path, ATM_VOL_COLUMNS, positive=ATM_VOL_COLUMNS)
    return _build(file_path, AtmVolQuotes, frame["expiry_years"].to_numpy(), frame["vol"].to_numpy())


def load_reference_cva(file_path: str) -> pd.DataFrame:
    """
    Reads published adjustments to compare against: one row per (side, kind, rho_bar, multiplier).

    Raises:
        ConfigError: Every bad label or number in the file.
    """
    numbers = read_market_table(
        file_path, REFERENCE_CVA_COLUMNS[2:], positive=("multiplier",), nonnegative=("cva_usd",)
    )
    labels = pd.read_csv(file_path, comment="#", skipinitialspace=True, dtype=str)
    labels.columns = [str(c).strip() for c in labels.columns]
    problems = []
    for column, allowed in (("side", tuple(s.value for s in Side)), ("kind", REFERENCE_KINDS)):
        if column not in labels.columns:
            problems.append(f"{file_path}: missing column '{column}'")
            continue
        labels[column] = labels[column].fillna("").str.strip()
        for row, value in enumerate(labels[column]):
            if value not in allowed:
                problems.append(f"{file_path}:{row + 2}: field '{column}' must be one of {', '.join(allowed)}")
    if problems:
        raise ConfigError(problems)
    frame = pd.concat([labels[["side", "kind"]], numbers], axis=1)
    if frame.duplicated(["side", "kind", "rho_bar", "multiplier"]).any():
        raise ConfigError([f"{file_path}: duplicate (side, kind, rho_bar, multiplier) rows"])
    return frame[list(REFERENCE_CVA_COLUMNS)]


async def read_file_async(file_path: str) -> Optional[str]:
    """
    Asynchronously reads the content of a file.

    Returns:
        Optional[str]: The content, or None when the file cannot be read.
    """
    try:
        async with aiofiles.open(file_path, "r", encoding="utf-8") as f:
            content = await f.read()
        logger.debug(f"Read content from '{file_path}'.")
        return content
    except OSError as e:
        logger.error(f"Error reading file '{file_path}': {e}")
        return None


async def write_file_async(file_path: str, content: str) -> bool:
    """
    Asynchronously writes text, creating the parent directory.

    Returns:
        bool: True on success.
    """
    try:
        parent = os.path.dirname(file_path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        async with aiofiles.open(file_path, "w", encoding="utf-8") as f:
            await f.write(content)
        logger.info(f"Wrote '{file_path}'.")
        return True
    except OSError as e:
        logger.error(f"Error writing file '{file_path}': {e}", exc_info=True)
        return False


async def write_files_async(contents: Mapping[str, str]) -> bool:
    """Writes several files concurrently; True only if all of them were written."""
    results = await asyncio.gather(*(write_file_async(path, text) for path, text in contents.items()))
    return all(results)


def frame_to_csv(frame: pd.DataFrame) -> str:
    # repr-style floats so reloading gives back the same doubles
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format=None, lineterminator="\n")
    return buffer.getvalue()


def results_to_frame(results: Sequence[CvaResult]) -> pd.DataFrame:
    return pd.DataFrame([r.as_row() for r in results], columns=RESULT_COLUMNS)


def results_to_csv(results: Sequence[CvaResult]) -> str:
    """CSV text with the documented column order."""
    return frame_to_csv(results_to_frame(results))


def read_results_csv(file_path: str) -> List[CvaResult]:
    """
    Loads a results CSV written by results_to_csv.

    Raises:
        ConfigError: Missing file or columns.
    """
    if not os.path.isfile(file_path):
        raise ConfigError([f"{file_path}: file not found"])
    frame = pd.read_csv(file_path, keep_default_na=False, na_values=["nan", "NaN", ""])
    missing = [c for c in RESULT_COLUMNS if c not in frame.columns]
    if missing:
        raise ConfigError([f"{file_path}: missing column(s) {', '.join(missing)}"])
    results = []
    for row in frame.to_dict(orient="records"):
        status = str(row["status"])
        error = None
        if ":" in status:
            status, error = (part.strip() for part in status.split(":", 1))
        results.append(
            CvaResult(
                cva=float(row["cva_usd"]),
                std_error=float(row["std_error"]),
                cva_pct=float(row["cva_pct"]),
                adjusted_strike=float(row["adjusted_strike"]),
                side=str(row["side"]),
                rho_bar=float(row["rho_bar"]),
                oil_vol_mult=float(row["oil_vol_mult"]),
                cir_vol_mult=float(row["cir_vol_mult"]),
                spot_vol=float(row["sigma_s"]),
                intensity_vol=float(row["nu"]),
                estimator=str(row["estimator"]),
                n_paths=int(row["n_paths"]),
                scenario_id=str(row["scenario_id"]),
                status=status,
                error=error,
            )
        )
    logger.debug(f"Loaded {len(results)} results from '{file_path}'.")
    return results


def _floats(values) -> List[float]:
    return [float(v) for v in np.asarray(values, dtype=float)]


def _credit_to_dict(model: CreditModel) -> Dict[str, object]:
    p = model.params
    return {
        "cir": {"y0": p.y0, "kappa": p.kappa, "mu": p.mu, "nu": p.nu},
        "shift": {"times": _floats(model.shift.times), "psi": _floats(model.shift.psi)},
        "hazard": {"tenors": _floats(model.market.tenors), "hazard_rates": _floats(model.market.hazard_rates)},
    }


def _credit_from_dict(data: Mapping) -> CreditModel:
    return CreditModel(
        CirParams(**data["cir"]),
        CreditShift(data["shift"]["times"], data["shift"]["psi"]),
        HazardCurve(data["hazard"]["tenors"], data["hazard"]["hazard_rates"]),
    )


def state_to_dict(market: CalibratedMarket, fingerprint: Optional[str] = None) -> Dict[str, object]:
    """
    Calibrated market as plain JSON types; floats keep full precision.

    `fingerprint` identifies the inputs the market was calibrated from.
    """
    oil = market.oil_model
    p = oil.params
    return {
        "fingerprint": fingerprint,
        "version": STATE_VERSION,
        "zero_curve": {"tenors": _floats(market.curve.tenors), "zero_rates": _floats(market.curve.zero_rates)},
        "forward_curve": {
            "maturities": _floats(market.forward_quotes.maturities),
            "prices": _floats(market.forward_quotes.prices),
        },
        "oil": {
            "params": {"k_x": p.k_x, "sigma_x": p.sigma_x, "sigma_L": p.sigma_L, "rho_xL": p.rho_xL, "mu_L": p.mu_L},
            "shift": {"maturities": _floats(oil.shift.maturities), "phi": _floats(oil.shift.phi)},
            "x0": oil.x0,
            "L0": oil.L0,
        },
        "counterparties": {side: _credit_to_dict(model) for side, model in market.counterparties.items()},
        "allow_negative_shift": market.allow_negative_shift,
    }


def state_from_dict(data: Mapping) -> CalibratedMarket:
    """
    Rebuilds a CalibratedMarket from state_to_dict output.

    Raises:
        ConfigError: Unknown version or malformed content.
    """
    if data.get("version") != STATE_VERSION:
        raise ConfigError([f"calibrated state: unsupported version {data.get('version')!r}"])
    try:
        oil = data["oil"]
        oil_model = OilModel(
            OilParams(**oil["params"]),
            OilShift(oil["shift"]["maturities"], oil["shift"]["phi"]),
            float(oil["x0"]),
            float(oil["L0"]),
        )
        return CalibratedMarket(
            curve=ZeroCurve(data["zero_curve"]["tenors"], data["zero_curve"]["zero_rates"]),
            forward_quotes=ForwardCurveQuotes(data["forward_curve"]["maturities"], data["forward_curve"]["prices"]),
            oil_model=oil_model,
            counterparties={side: _credit_from_dict(c) for side, c in data["counterparties"].items()},
            allow_negative_shift=bool(data.get("allow_negative_shift", False)),
        )
    except (KeyError, TypeError, CvaError) as e:
        raise ConfigError([f"calibrated state: malformed content ({e})"])


def state_to_json(market: CalibratedMarket, fingerprint: Optional[str] = None) -> str:
    return json.dumps(state_to_dict(market, fingerprint), indent=2)


def load_state(file_path: str) -> CalibratedMarket:
    """
    Reads calibrated_state.json.

    Raises:
        ConfigError: Missing file, invalid JSON or malformed content.
    """
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError([f"{file_path}: file not found"])
    except json.JSONDecodeError as e:
        raise ConfigError([f"{file_path}:{e.lineno}: invalid JSON ({e.msg})"])
    logger.debug(f"Calibrated state loaded from '{file_path}'.")
    return state_from_dict(data)


def state_fingerprint(file_path: str) -> Optional[str]:
    """Input fingerprint stored in a calibrated state file; None when absent or unreadable."""
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        logger.warning(f"Cannot read calibrated state '{file_path}': {e}")
        return None
    fingerprint = data.get("fingerprint") if isinstance(data, dict) else None
    return fingerprint if isinstance(fingerprint, str) else None
