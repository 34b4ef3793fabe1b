# market/cds.py

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.optimize import brentq

from market.curves import CdsQuoteSet, HazardCurve, ZeroCurve, discount_factor, survival_probability
from utils.errors import CalibrationError, DomainError

logger = logging.getLogger(__name__)

# default buckets per premium period for the protection and accrual integrals
DEFAULT_SUBSTEPS = 8
DEFAULT_HAZARD_CAP = 5.0
VALUE_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class CdsSchedule:
    """
    Premium schedule T_a = start < T_{a+1} < ... < T_b of a running-spread CDS.
    """

    payment_times: np.ndarray
    start: float = 0.0

    def __post_init__(self):
        times = np.array(self.payment_times, dtype=float).reshape(-1)
        if times.size == 0 or times[0] <= self.start or np.any(np.diff(times) <= 0.0):
            raise DomainError("CDS schedule must be strictly increasing and start after T_a.")
        times.setflags(write=False)
        object.__setattr__(self, "payment_times", times)

    @classmethod
    def regular(cls, maturity: float, frequency: int = 4, start: float = 0.0) -> "CdsSchedule":
        """Rolls back from maturity in 1/frequency steps; a short stub sits at the front."""
        step = 1.0 / frequency
        n_periods = int(np.ceil((maturity - start) / step - 1e-9))
        times = maturity - step * np.arange(n_periods)[::-1]
        times = times[times > start + 1e-12]
        return cls(times, start)

    @property
    def accruals(self) -> np.ndarray:
        return np.diff(np.concatenate(([self.start], self.payment_times)))


def cds_legs(
    h: HazardCurve,
    curve: ZeroCurve,
    schedule: CdsSchedule,
    substeps: int = DEFAULT_SUBSTEPS,
) -> Tuple[float, float]:
    """
    Values the two CDS legs per unit notional.

    The accrual-on-default and protection integrals are discretized on
    `substeps` default buckets per premium period, evaluated at bucket midpoints.

    Returns:
        Tuple[float, float]: (risky annuity incl. accrual on default, protection per unit LGD).
    """
    starts = np.concatenate(([schedule.start], schedule.payment_times[:-1]))
    ends = schedule.payment_times
    coupons = np.sum(schedule.accruals * discount_factor(curve, ends) * survival_probability(h, ends))

    fractions = np.linspace(0.0, 1.0, substeps + 1)
    edges = starts[:, None] + (ends - starts)[:, None] * fractions[None, :]
    q = survival_probability(h, edges)
    dq = q[:, :-1] - q[:, 1:]
    mids = 0.5 * (edges[:, :-1] + edges[:, 1:])
    df_mid = discount_factor(curve, mids)

    accrual_on_default = np.sum(df_mid * (mids - starts[:, None]) * dq)
    protection = np.sum(df_mid * dq)
    return float(coupons + accrual_on_default), float(protection)


def cds_model_price(
    h: HazardCurve,
    curve: ZeroCurve,
    spread: float,
    lgd: float,
    schedule: CdsSchedule,
    substeps: int = DEFAULT_SUBSTEPS,
) -> float:
    """
    Value at time 0 of a receiver CDS (protection seller) per unit notional:
    spread times the risky annuity minus LGD times the protection leg.

    Parameters:
        h (HazardCurve): Survival curve of the reference entity.
        curve (ZeroCurve): Discount curve.
        spread (float): Running spread, decimal per year.
        lgd (float): Loss given default.
        schedule (CdsSchedule): Premium dates.

    Returns:
        float: CDS value; zero at the par spread.
    """
    annuity, protection = cds_legs(h, curve, schedule, substeps)
    return spread * annuity - lgd * protection


def cds_par_spread(
    h: HazardCurve,
    curve: ZeroCurve,
    maturity: float,
    lgd: float,
    frequency: int = 4,
    substeps: int = DEFAULT_SUBSTEPS,
) -> float:
    """Running spread that sets cds_model_price to zero."""
    annuity, protection = cds_legs(h, curve, CdsSchedule.regular(maturity, frequency), substeps)
    return lgd * protection / annuity


def strip_hazard_curve(
    quotes: CdsQuoteSet,
    curve: ZeroCurve,
    hazard_cap: float = DEFAULT_HAZARD_CAP,
    substeps: int = DEFAULT_SUBSTEPS,
) -> HazardCurve:
    """
    Bootstraps a piecewise-constant hazard curve, maturity by maturity, so that
    every quoted CDS reprices to zero at its quoted spread.

    Parameters:
        quotes (CdsQuoteSet): Running-spread quotes with recovery and frequency.
        curve (ZeroCurve): Discount curve.
        hazard_cap (float): Upper end of the root bracket per bucket.

    Returns:
        HazardCurve: The stripped curve with nodes at the quoted maturities.

    Raises:
        CalibrationError: No root in (0, hazard_cap], or a negative implied hazard.
    """
    lgd = quotes.lgd
    tenors, hazards = [], []
    for maturity, spread in zip(quotes.maturities, quotes.spreads):
        schedule = CdsSchedule.regular(maturity, quotes.payment_frequency)

        def value(hazard: float) -> float:
            trial = HazardCurve(tenors + [maturity], hazards + [hazard])
            return cds_model_price(trial, curve, spread, lgd, schedule, substeps)

        value_at_zero = value(0.0)
        if value_at_zero <= 0.0:
            if value_at_zero < -VALUE_TOLERANCE:
                raise CalibrationError(
                    f"Quote {spread / 1e-4:.2f}bp at {maturity}y implies a negative hazard rate "
                    f"(arbitrageable quote set).",
                    maturity=float(maturity),
                )
            hazard = 0.0
        else:
            if value(hazard_cap) > 0.0:
                raise CalibrationError(
                    f"No hazard rate in (0, {hazard_cap}] reprices the {maturity}y quote.",
                    maturity=float(maturity),
                )
            hazard = brentq(value, 0.0, hazard_cap, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        logger.debug(f"Bucket to {maturity}y: spread {spread:.6f}, hazard {hazard:.8f}")
        tenors.append(float(maturity))
        hazards.append(float(hazard))

    stripped = HazardCurve(tenors, hazards)
    logger.info(f"Stripped hazard curve with {len(tenors)} buckets up to {tenors[-1]}y.")
    return stripped
