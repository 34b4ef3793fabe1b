# pricing/scenarios.py

import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence

from market.curves import ForwardCurveQuotes, ZeroCurve
from models.credit_model import CreditModel
from models.oil_model import OilModel, OilParams, calibrate_oil_model
from pricing.cva_engine import CorrelationSpec, CvaResult, SimulationConfig, run_cva
from pricing.pricers import CommoditySwap, Product, Side, fair_strike, with_side
from utils.errors import CvaError, DomainError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CalibratedMarket:
    """
    Everything a scenario is built from.

    `counterparties` maps a product side to the credit model of whoever faces
    that side: the payer is exposed to the seller, the receiver to the buyer.
    """

    curve: ZeroCurve
    forward_quotes: ForwardCurveQuotes
    oil_model: OilModel
    counterparties: Dict[str, CreditModel]
    allow_negative_shift: bool = False

    def counterparty(self, side: Side) -> CreditModel:
        key = Side(side).value
        if key not in self.counterparties:
            raise DomainError(f"No counterparty credit model for the {key} side.")
        return self.counterparties[key]


@dataclass(frozen=True, eq=False)
class Scenario:
    product: Product
    oil_model: OilModel
    credit_model: CreditModel
    corr: CorrelationSpec
    rho_bar: float
    oil_vol_mult: float = 1.0
    cir_vol_mult: float = 1.0

    @property
    def scenario_id(self) -> str:
        return scenario_id(Side(self.product.side), self.rho_bar, self.oil_vol_mult, self.cir_vol_mult)


@dataclass(frozen=True)
class SweepSpec:
    """
    Grid of market correlations and volatility multipliers, per side.

    Cells refit the credit shift with a signed Psi unless `allow_negative_shift` is off:
    a small intensity vol on a steep curve needs a decreasing Psi to keep the market survival.
    """

    rho_bars: Sequence[float] = (0.0,)
    oil_vol_mults: Sequence[float] = (1.0,)
    cir_vol_mults: Sequence[float] = (1.0,)
    sides: Sequence[str] = (Side.PAYER.value,)
    allow_negative_shift: bool = True

    def __post_init__(self):
        for name in ("oil_vol_mults", "cir_vol_mults"):
            values = tuple(float(v) for v in getattr(self, name))
            if any(v <= 0.0 for v in values):
                raise DomainError(f"{name} must be positive.")
            object.__setattr__(self, name, values)
        object.__setattr__(self, "rho_bars", tuple(float(r) for r in self.rho_bars))
        object.__setattr__(self, "sides", tuple(Side(s).value for s in self.sides))

    @property
    def size(self) -> int:
        return len(self.sides) * len(self.rho_bars) * len(self.oil_vol_mults) * len(self.cir_vol_mults)


def scenario_id(side: Side, rho_bar: float, oil_vol_mult: float, cir_vol_mult: float) -> str:
    return f"{Side(side).value}_rho{rho_bar:+.3f}_oil{oil_vol_mult:g}_cir{cir_vol_mult:g}"


def anchor_forward_curve(
    quotes: ForwardCurveQuotes, params: OilParams, swap: CommoditySwap, curve: ZeroCurve
) -> ForwardCurveQuotes:
    """
    Rescales the quotes so the default-free fair strike of `swap` equals its strike.

    A common factor on every quote moves phi by a constant, so one rescaling is exact.
    """
    model = calibrate_oil_model(params, quotes)
    current = fair_strike(swap, model, model.initial_state, curve)
    factor = swap.strike / current
    logger.info(f"Anchored forward curve to fair strike {swap.strike} (model {current:.6f}, factor {factor:.8f}).")
    return quotes.scaled(factor)


def build_scenario(
    market: CalibratedMarket,
    product: Product,
    rho_bar: float,
    oil_vol_mult: float = 1.0,
    cir_vol_mult: float = 1.0,
    allow_negative: Optional[bool] = None,
) -> Scenario:
    """
    Applies the multipliers and refits both shifts so the forward curve and survival curve still hold.

    `allow_negative` overrides the market setting for the refitted credit shift; an accepted
    decreasing Psi is logged as a warning.

    Raises:
        CalibrationError: The refitted credit shift is not admissible.
        CorrelationError: rho_bar is out of reach for the scaled oil parameters.
    """
    oil_model = market.oil_model
    if oil_vol_mult != 1.0:
        oil_model = oil_model.with_params(oil_model.params.scale_vols(oil_vol_mult), market.forward_quotes)
    credit_model = market.counterparty(product.side)
    if allow_negative is None:
        allow_negative = market.allow_negative_shift
    if cir_vol_mult != 1.0:
        credit_model = credit_model.with_params(credit_model.params.scale_nu(cir_vol_mult), allow_negative=allow_negative)
    corr = CorrelationSpec.from_market(rho_bar, oil_model.params)
    return Scenario(product, oil_model, credit_model, corr, rho_bar, oil_vol_mult, cir_vol_mult)


def price_scenario(scenario: Scenario, market: CalibratedMarket, config: SimulationConfig) -> CvaResult:
    result = run_cva(
        scenario.product, scenario.oil_model, scenario.credit_model, market.curve, scenario.corr, config
    )
    return replace(
        result,
        oil_vol_mult=scenario.oil_vol_mult,
        cir_vol_mult=scenario.cir_vol_mult,
        scenario_id=scenario.scenario_id,
    )


def run_sweep(
    market: CalibratedMarket, product: Product, spec: SweepSpec, config: SimulationConfig
) -> List[CvaResult]:
    """
    Prices every cell of the sweep grid with common random numbers.

    A cell whose recalibration or simulation fails is reported as a failed
    CvaResult and the sweep carries on.

    Parameters:
        market (CalibratedMarket): Base calibrated market.
        product (Product): Contract; its side is replaced by each side of the spec.
        spec (SweepSpec): Grid.
        config (SimulationConfig): Simulation settings shared by every cell.

    Returns:
        List[CvaResult]: One result per cell, ordered side, rho_bar, oil multiplier, intensity multiplier.
    """
    results: List[CvaResult] = []
    for side in spec.sides:
        sided = with_side(product, Side(side))
        for rho_bar in spec.rho_bars:
            for oil_mult in spec.oil_vol_mults:
                for cir_mult in spec.cir_vol_mults:
                    cell_id = scenario_id(Side(side), rho_bar, oil_mult, cir_mult)
                    try:
                        scenario = build_scenario(
                            market, sided, rho_bar, oil_mult, cir_mult, spec.allow_negative_shift
                        )
                        results.append(price_scenario(scenario, market, config))
                    except CvaError as e:
                        logger.warning(f"Sweep cell {cell_id} skipped: {e}")
                        base_credit = market.counterparty(Side(side)).params
                        results.append(
                            CvaResult.failed(
                                side,
                                str(e),
                                rho_bar=rho_bar,
                                oil_vol_mult=oil_mult,
                                cir_vol_mult=cir_mult,
                                spot_vol=market.oil_model.params.spot_vol * oil_mult,
                                intensity_vol=base_credit.nu * cir_mult,
                                estimator=config.estimator.value,
                                n_paths=config.n_paths,
                                scenario_id=cell_id,
                            )
                        )
    logger.info(f"Sweep finished: {sum(r.ok for r in results)}/{len(results)} cells priced.")
    return results
