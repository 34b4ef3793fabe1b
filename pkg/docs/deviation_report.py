# docs/deviation_report.py

import logging
import math
import os
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from docs.report_generator import CREDIT, OIL, split_by_kind
from fileio.file_manager import frame_to_csv
from pricing.cva_engine import CvaResult
from pricing.pricers import Side

logger = logging.getLogger(__name__)

DEVIATION_FILE = "deviation_report"
DEVIATION_COLUMNS = [
    "side",
    "kind",
    "rho_bar",
    "multiplier",
    "model_usd",
    "std_error",
    "anchored_usd",
    "reference_usd",
    "deviation",
    "band",
    "within_band",
]

# Relative bands for anchored cells of the independent (rho_bar = 0) row, keyed by
# (kind, multiplier). Cells without a band are reported, not checked.
DEVIATION_BANDS: Dict[Tuple[str, float], float] = {
    (CREDIT, 0.05): 0.20,
    (CREDIT, 0.5): 0.20,
    (CREDIT, 1.0): 0.20,
    (OIL, 0.5): 0.25,
    (OIL, 1.0): 0.20,
    (OIL, 2.0): 0.40,
}


def _key(side: str, kind: str, rho_bar: float, multiplier: float) -> Tuple[str, str, float, float]:
    return side, kind, round(float(rho_bar), 6), round(float(multiplier), 6)


def _multiplier(result: CvaResult, kind: str) -> float:
    return result.cir_vol_mult if kind == CREDIT else result.oil_vol_mult


def _is_base(result: CvaResult) -> bool:
    return result.ok and result.rho_bar == 0.0 and result.oil_vol_mult == 1.0 and result.cir_vol_mult == 1.0


def cell_band(kind: str, rho_bar: float, multiplier: float) -> Optional[float]:
    if rho_bar != 0.0:
        return None
    return DEVIATION_BANDS.get((kind, round(float(multiplier), 6)))


def anchor_factors(results: Sequence[CvaResult], reference: pd.DataFrame) -> Dict[str, float]:
    """
    Per side, reference / model at the base cell (rho_bar = 0, both multipliers 1).

    Scaling a side's cells by its factor is the same as recalibrating the LGD
    so that the base cell matches; sides without a base cell on either end are left out.
    """
    lookup = {_key(*row[:4]): row[4] for row in reference.itertuples(index=False)}
    factors = {}
    for result in results:
        if not _is_base(result) or result.cva <= 0.0:
            continue
        target = lookup.get(_key(result.side, CREDIT, 0.0, 1.0))
        if target is not None:
            factors[result.side] = float(target) / result.cva
    return factors


def deviation_frame(results: Sequence[CvaResult], reference: pd.DataFrame) -> pd.DataFrame:
    """
    Compares every reported cell with its published counterpart after anchoring.

    Parameters:
        results (Sequence[CvaResult]): Sweep results.
        reference (pd.DataFrame): Output of load_reference_cva.

    Returns:
        pd.DataFrame: DEVIATION_COLUMNS, sorted by side, kind, rho_bar, multiplier.
    """
    lookup = {_key(*row[:4]): row[4] for row in reference.itertuples(index=False)}
    factors = anchor_factors(results, reference)
    rows = []
    for (side, kind), cells in split_by_kind(results).items():
        factor = factors.get(side, float("nan"))
        for r in cells:
            multiplier = _multiplier(r, kind)
            target = lookup.get(_key(side, kind, r.rho_bar, multiplier))
            if target is None:
                continue
            anchored = r.cva * factor
            deviation = anchored / target - 1.0 if target > 0.0 else float("nan")
            band = cell_band(kind, r.rho_bar, multiplier)
            rows.append(
                {
                    "side": side,
                    "kind": kind,
                    "rho_bar": r.rho_bar,
                    "multiplier": multiplier,
                    "model_usd": r.cva,
                    "std_error": r.std_error,
                    "anchored_usd": anchored,
                    "reference_usd": float(target),
                    "deviation": deviation,
                    "band": float("nan") if band is None else band,
                    "within_band": None if band is None else bool(abs(deviation) <= band),
                }
            )
    frame = pd.DataFrame(rows, columns=DEVIATION_COLUMNS)
    return frame.sort_values(["side", "kind", "rho_bar", "multiplier"], kind="mergesort").reset_index(drop=True)


def monotonicity_violations(results: Sequence[CvaResult], n_se: float = 3.0) -> List[str]:
    """
    Ordering checks that hold in every published table, each up to n_se combined standard errors:
    the payer adjustment rises with rho_bar, the receiver's falls, and both rise with oil vol.

    Returns:
        List[str]: One message per violated neighbour pair; empty when the ordering holds.
    """
    problems = []

    def check(label: str, ordered: List[CvaResult], rising: bool) -> None:
        for a, b in zip(ordered, ordered[1:]):
            slack = n_se * math.hypot(a.std_error, b.std_error)
            step = b.cva - a.cva if rising else a.cva - b.cva
            if step < -slack:
                direction = "rise" if rising else "fall"
                problems.append(
                    f"{label}: expected a {direction} from {a.scenario_id} ({a.cva:.4f}) "
                    f"to {b.scenario_id} ({b.cva:.4f}), slack {slack:.4f}"
                )

    for (side, kind), cells in split_by_kind(results).items():
        ok = [r for r in cells if r.ok]
        rising_in_rho = Side(side) is Side.PAYER
        for multiplier in sorted({_multiplier(r, kind) for r in ok}):
            column = sorted((r for r in ok if _multiplier(r, kind) == multiplier), key=lambda r: r.rho_bar)
            check(f"{side} {kind} x{multiplier:g}", column, rising_in_rho)
        if kind == OIL:
            for rho_bar in sorted({r.rho_bar for r in ok}):
                row = sorted((r for r in ok if r.rho_bar == rho_bar), key=lambda r: r.oil_vol_mult)
                check(f"{side} oil rho_bar {rho_bar:+.3f}", row, True)
    return problems


def render_deviation_report(
    results: Sequence[CvaResult], reference: pd.DataFrame, lgd: float, out_dir: str
) -> Dict[str, str]:
    """
    Per-cell comparison with the published tables, anchored through the LGD.

    Parameters:
        results (Sequence[CvaResult]): Sweep results.
        reference (pd.DataFrame): Published cells.
        lgd (float): LGD the results were computed with.
        out_dir (str): Directory the returned paths point into.

    Returns:
        Dict[str, str]: deviation_report.csv and deviation_report.md, or {} when nothing matches.
    """
    frame = deviation_frame(results, reference)
    if frame.empty:
        logger.warning("No sweep cell matches the reference table.")
        return {}
    factors = anchor_factors(results, reference)
    banded = frame[frame["band"].notna()]
    lines = ["# Deviation from the published tables\n\n"]
    for side, factor in sorted(factors.items()):
        lines.append(f"- {side}: anchor factor {factor:.4f}, implied LGD {lgd * factor:.4f}\n")
    lines.append(f"- banded cells within their band: {int(banded['within_band'].sum())}/{len(banded)}\n")
    violations = monotonicity_violations(results)
    lines.append(f"- ordering violations: {len(violations)}\n")
    for problem in violations:
        lines.append(f"  - {problem}\n")
    lines.append("\n| side | table | rho_bar | multiplier | model (USD) | anchored (USD) | published (USD) | deviation | band |\n")
    lines.append("|---|---|---|---|---|---|---|---|---|\n")
    for row in frame.itertuples(index=False):
        band = "report only" if math.isnan(row.band) else f"±{100.0 * row.band:.0f}%"
        lines.append(
            f"| {row.side} | {row.kind} | {row.rho_bar:+.3f} | {row.multiplier:g} | "
            f"{row.model_usd:.2f} ± {row.std_error:.2f} | {row.anchored_usd:.2f} | {row.reference_usd:.2f} | "
            f"{100.0 * row.deviation:+.1f}% | {band} |\n"
        )
    stem = os.path.join(out_dir, DEVIATION_FILE)
    logger.info(f"Deviation report: {len(frame)} cells, {len(violations)} ordering violations.")
    return {f"{stem}.csv": frame_to_csv(frame), f"{stem}.md": "".join(lines)}
