# docs/report_generator.py

import logging
import math
import os
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from fileio.file_manager import frame_to_csv
from models.oil_model import OilParams, vol_term_structure
from pricing.cva_engine import CvaResult

logger = logging.getLogger(__name__)

CREDIT = "credit"
OIL = "oil"
VOL_TERM_STRUCTURE = "vol_term_structure"
DEFAULT_EXPIRIES = (0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0)

COLUMN_LABELS = {CREDIT: "intensity volatility nu", OIL: "spot vol sigma_S"}
REPORT_CSV_COLUMNS = ["side", "rho_bar", "column", "cva_usd", "std_error", "cva_pct", "adjusted_strike", "status"]


def _column_value(result: CvaResult, kind: str, reference_spot_vol: float) -> float:
    if kind == CREDIT:
        return round(result.intensity_vol, 10)
    return round(result.oil_vol_mult * reference_spot_vol, 10)


def _format_number(value: float, digits: int = 2) -> str:
    return "n/a" if value is None or math.isnan(value) else f"{value:.{digits}f}"


def split_by_kind(results: Sequence[CvaResult]) -> Dict[Tuple[str, str], List[CvaResult]]:
    """
    Groups results into per-side credit-vol and oil-vol tables.

    A result at base oil vol belongs to the credit table and one at base
    intensity vol to the oil table; the base cell sits in both. The oil table
    only exists when some oil multiplier differs from 1, and a side always gets
    at least its credit table.
    """
    groups: Dict[Tuple[str, str], List[CvaResult]] = {}
    for side in sorted({r.side for r in results}):
        sided = [r for r in results if r.side == side]
        has_oil = any(r.oil_vol_mult != 1.0 for r in sided)
        has_credit = any(r.cir_vol_mult != 1.0 for r in sided) or not has_oil
        if has_credit:
            groups[(side, CREDIT)] = [r for r in sided if r.oil_vol_mult == 1.0]
        if has_oil:
            groups[(side, OIL)] = [r for r in sided if r.cir_vol_mult == 1.0]
    return groups


def table_frame(
    results: Sequence[CvaResult], kind: str, fixed_leg: float, reference_spot_vol: float
) -> pd.DataFrame:
    """Long-format table: one row per cell, sorted by rho_bar then column value."""
    rows = []
    for r in results:
        rows.append(
            {
                "side": r.side,
                "rho_bar": r.rho_bar,
                "column": _column_value(r, kind, reference_spot_vol),
                "cva_usd": r.cva,
                "std_error": r.std_error,
                "cva_pct": 100.0 * r.cva / fixed_leg if fixed_leg > 0.0 else float("nan"),
                "adjusted_strike": r.adjusted_strike,
                "status": r.status,
            }
        )
    frame = pd.DataFrame(rows, columns=REPORT_CSV_COLUMNS)
    return frame.sort_values(["rho_bar", "column"], kind="mergesort").reset_index(drop=True)


def render_markdown_table(
    results: Sequence[CvaResult], kind: str, fixed_leg: float, reference_spot_vol: float
) -> str:
    """
    Renders the rho_bar x volatility grid, three rows per correlation: the
    adjustment with its standard error, its share of the fixed leg, and the adjusted strike.

    Parameters:
        results (Sequence[CvaResult]): Cells of one side and kind.
        kind (str): 'credit' (columns by nu) or 'oil' (columns by sigma_S).
        fixed_leg (float): Fixed leg value for the percentage column.
        reference_spot_vol (float): Spot vol at oil multiplier 1.

    Returns:
        str: Markdown table, or "" when nothing can be rendered.
    """
    try:
        frame = table_frame(results, kind, fixed_leg, reference_spot_vol)
        if frame.empty:
            return ""
        columns = sorted(frame["column"].unique())
        cells = {(row.rho_bar, row.column): row for row in frame.itertuples(index=False)}
        header = f"| rho_bar | {COLUMN_LABELS[kind]} | " + " | ".join(_format_number(c, 4) for c in columns) + " |\n"
        lines = [header, "|" + "---|" * (len(columns) + 2) + "\n"]
        for rho in sorted(frame["rho_bar"].unique()):
            cva_cells, pct_cells, strike_cells = [], [], []
            for column in columns:
                cell = cells.get((rho, column))
                if cell is None:
                    cva_cells.append("")
                    pct_cells.append("")
                    strike_cells.append("")
                elif cell.status != "ok":
                    cva_cells.append("failed")
                    pct_cells.append("failed")
                    strike_cells.append("failed")
                else:
                    cva_cells.append(f"{_format_number(cell.cva_usd)} ± {_format_number(cell.std_error)}")
                    pct_cells.append(f"{_format_number(cell.cva_pct, 3)}%")
                    strike_cells.append(_format_number(cell.adjusted_strike))
            label = f"{100.0 * rho:+.1f}" if rho != 0.0 else "0"
            lines.append(f"| {label} | CR-CVA (USD) | " + " | ".join(cva_cells) + " |\n")
            lines.append("|  | CR-CVA (% fixed leg) | " + " | ".join(pct_cells) + " |\n")
            lines.append("|  | Adjusted Strike | " + " | ".join(strike_cells) + " |\n")
        return "".join(lines)
    except (KeyError, ValueError) as e:
        logger.error(f"Error rendering {kind} table: {e}", exc_info=True)
        return ""


def vol_term_structure_frame(
    params: OilParams, multipliers: Sequence[float] = (1.0,), expiries: Sequence[float] = DEFAULT_EXPIRIES
) -> pd.DataFrame:
    """Model ATM vol by expiry, one column per oil-vol multiplier."""
    data = {"expiry_years": np.asarray(expiries, dtype=float)}
    for mult in multipliers:
        data[f"vol_x{mult:g}"] = vol_term_structure(params.scale_vols(mult), expiries)[:, 1]
    return pd.DataFrame(data)


def render_vol_markdown(frame: pd.DataFrame) -> str:
    """(T, vol) pairs of the model ATM vol term structure, one column per oil multiplier."""
    vol_columns = [c for c in frame.columns if c != "expiry_years"]
    lines = ["| expiry (years) | " + " | ".join(c.replace("vol_", "ATM vol ") for c in vol_columns) + " |\n"]
    lines.append("|" + "---|" * (len(vol_columns) + 1) + "\n")
    for record in frame.to_dict("records"):
        values = [f"{100.0 * record[c]:.2f}%" for c in vol_columns]
        lines.append(f"| {record['expiry_years']:g} | " + " | ".join(values) + " |\n")
    return "".join(lines)


def render_report(
    results: Sequence[CvaResult],
    fixed_leg: float,
    out_dir: str,
    reference_spot_vol: float = 0.3285,
    vol_frame: Optional[pd.DataFrame] = None,
) -> Dict[str, str]:
    """
    Builds every report file for a result set; a pure function of its inputs.

    Parameters:
        results (Sequence[CvaResult]): Sweep or single-scenario results.
        fixed_leg (float): Fixed leg value used for percentages.
        out_dir (str): Directory the returned paths point into.
        reference_spot_vol (float): Spot vol label for oil multiplier 1.
        vol_frame (Optional[pd.DataFrame]): Model ATM vol term structure (vol_term_structure_frame).

    Returns:
        Dict[str, str]: File path -> content, report_<side>_<kind>.md and .csv per table, plus
        vol_term_structure.md and .csv when vol_frame is given.
    """
    if not results:
        logger.warning("No results to report.")
        return {}
    files: Dict[str, str] = {}
    for (side, kind), cells in split_by_kind(results).items():
        stem = os.path.join(out_dir, f"report_{side}_{kind}")
        table = render_markdown_table(cells, kind, fixed_leg, reference_spot_vol)
        title = f"# {side.capitalize()} CR-CVA: effect of {'credit spread' if kind == CREDIT else 'oil'} volatility\n\n"
        footer = f"\nFixed leg value: {fixed_leg:.2f} USD. Cells show CVA ± one standard error.\n"
        files[f"{stem}.md"] = title + table + footer
        files[f"{stem}.csv"] = frame_to_csv(table_frame(cells, kind, fixed_leg, reference_spot_vol))
    if vol_frame is not None and not vol_frame.empty:
        stem = os.path.join(out_dir, VOL_TERM_STRUCTURE)
        title = "# Model ATM volatility term structure\n\n"
        files[f"{stem}.md"] = title + render_vol_markdown(vol_frame)
        files[f"{stem}.csv"] = frame_to_csv(vol_frame)
    logger.info(f"Rendered {len(files) // 2} report tables.")
    return files
