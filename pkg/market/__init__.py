# market/__init__.py

from .curves import (
    BPS,
    ZeroCurve,
    HazardCurve,
    CdsQuoteSet,
    ForwardCurveQuotes,
    AtmVolQuotes,
    discount_factor,
    survival_probability,
)
from .cds import CdsSchedule, cds_legs, cds_model_price, cds_par_spread, strip_hazard_curve

__all__ = [
    "BPS",
    "ZeroCurve",
    "HazardCurve",
    "CdsQuoteSet",
    "ForwardCurveQuotes",
    "AtmVolQuotes",
    "discount_factor",
    "survival_probability",
    "CdsSchedule",
    "cds_legs",
    "cds_model_price",
    "cds_par_spread",
    "strip_hazard_curve",
]
