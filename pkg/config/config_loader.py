# config/config_loader.py

import hashlib
import json
import logging
import os
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from fileio.file_manager import load_atm_vols, load_cds_quotes, load_forward_curve, load_zero_curve
from market.curves import AtmVolQuotes, CdsQuoteSet, ForwardCurveQuotes, ZeroCurve
from models.credit_model import CirParams
from models.oil_model import OilParams
from pricing.cva_engine import DEFAULT_CHUNK_SIZE, DEFAULT_LGD, DEFAULT_PATHS, DEFAULT_SEED, SimulationConfig
from pricing.pricers import CommoditySwap, ForwardContract, Product, Side
from pricing.scenarios import SweepSpec
from utils.errors import ConfigError

logger = logging.getLogger(__name__)

SEED_ENV = "CRCVA_SEED"
DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), "config.json")


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CirSection(Section):
    y0: float = Field(ge=0.0)
    kappa: float = Field(gt=0.0)
    mu: float = Field(gt=0.0)
    nu: float = Field(gt=0.0)

    def to_params(self) -> CirParams:
        return CirParams(self.y0, self.kappa, self.mu, self.nu)


class CounterpartySection(Section):
    name: str
    cds_quotes: str
    recovery: float = Field(default=0.4, ge=0.0, lt=1.0)
    payment_frequency: int = Field(default=4, ge=1, le=12)
    cir: CirSection


class OilSection(Section):
    k_x: float = Field(gt=0.0)
    sigma_x: float = Field(ge=0.0)
    sigma_L: float = Field(ge=0.0)
    rho_xL: float = Field(ge=-1.0, le=1.0)
    mu_L: float = 0.0
    calibrate_to_atm_vols: bool = False
    reference_spot_vol: float = Field(default=0.3285, gt=0.0)

    def to_params(self) -> OilParams:
        return OilParams(self.k_x, self.sigma_x, self.sigma_L, self.rho_xL, self.mu_L)


class MarketSection(Section):
    zero_curve: str
    forward_curve: str
    atm_vols: Optional[str] = None
    anchor_forward_to_strike: bool = True


class ProductSection(Section):
    kind: Literal["swap", "forward"] = "swap"
    maturity: float = Field(default=5.0, gt=0.0)
    strike: float = Field(default=126.0, gt=0.0)
    notional: float = Field(default=1.0, gt=0.0)
    frequency: int = Field(default=12, ge=1, le=365)
    side: Literal["payer", "receiver"] = "payer"

    def to_product(self, side: Optional[str] = None) -> Product:
        chosen = Side(side or self.side)
        if self.kind == "forward":
            return ForwardContract(self.maturity, self.strike, chosen, self.notional)
        return CommoditySwap.regular(self.maturity, self.strike, chosen, self.notional, self.frequency)


class SimulationSection(Section):
    n_paths: int = Field(default=DEFAULT_PATHS, ge=1)
    seed: int = Field(default=DEFAULT_SEED, ge=0)
    estimator: Literal["intensity", "indicator"] = "intensity"
    antithetic: bool = True
    lgd: float = Field(default=DEFAULT_LGD, ge=0.0, le=1.0)
    cir_scheme: Literal["exact", "euler"] = "exact"
    n_workers: int = Field(default=1, ge=1)
    chunk_size: int = Field(default=DEFAULT_CHUNK_SIZE, ge=2)

    def to_config(self) -> SimulationConfig:
        return SimulationConfig(
            n_paths=self.n_paths,
            seed=self.seed,
            estimator=self.estimator,
            antithetic=self.antithetic,
            lgd=self.lgd,
            cir_scheme=self.cir_scheme,
            n_workers=self.n_workers,
            chunk_size=self.chunk_size,
        )


class SweepSection(Section):
    rho_bars: List[float] = Field(default_factory=lambda: [-0.689, -0.276, -0.138, 0.0, 0.138, 0.276, 0.689])
    oil_vol_mults: List[float] = Field(default_factory=lambda: [0.1, 0.5, 1.0, 2.0])
    cir_vol_mults: List[float] = Field(default_factory=lambda: [0.05, 0.5, 1.0])
    sides: List[Literal["payer", "receiver"]] = Field(default_factory=lambda: ["payer", "receiver"])
    allow_negative_shift: bool = True

    def to_spec(self, credit_grid: bool) -> SweepSpec:
        """Credit-vol grid (oil at base) or oil-vol grid (intensity vol at base)."""
        if credit_grid:
            return SweepSpec(self.rho_bars, (1.0,), self.cir_vol_mults, self.sides, self.allow_negative_shift)
        return SweepSpec(self.rho_bars, self.oil_vol_mults, (1.0,), self.sides, self.allow_negative_shift)


class RunConfig(Section):
    """
    Validated run configuration.

    `counterparties` is keyed by product side: the entry under "payer" is the
    credit of whoever faces the payer.
    """

    market: MarketSection
    counterparties: Dict[Literal["payer", "receiver"], CounterpartySection]
    oil: OilSection
    product: ProductSection = Field(default_factory=ProductSection)
    simulation: SimulationSection = Field(default_factory=SimulationSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    allow_negative_shift: bool = False
    reference_cva: Optional[str] = None
    output_dir: str = "output"
    provenance: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_invariants(self) -> "RunConfig":
        problems = []
        if not self.counterparties:
            problems.append("counterparties: at least one side must be configured")
        if self.product.side not in self.counterparties:
            problems.append(f"product.side: no counterparty configured for the '{self.product.side}' side")
        if self.product.kind == "swap":
            periods = self.product.maturity * self.product.frequency
            if abs(periods - round(periods)) > 1e-9:
                problems.append("product.maturity: must be a whole number of payment periods")
        for i, mult in enumerate(self.sweep.oil_vol_mults):
            if mult <= 0.0:
                problems.append(f"sweep.oil_vol_mults.{i}: multiplier must be positive, got {mult}")
        for i, mult in enumerate(self.sweep.cir_vol_mults):
            if mult <= 0.0:
                problems.append(f"sweep.cir_vol_mults.{i}: multiplier must be positive, got {mult}")
        for i, rho in enumerate(self.sweep.rho_bars):
            if abs(rho) > 1.0:
                problems.append(f"sweep.rho_bars.{i}: correlation must lie in [-1, 1], got {rho}")
        if self.simulation.antithetic and self.simulation.n_paths % 2:
            problems.append("simulation.n_paths: must be even with antithetic sampling")
        if self.oil.calibrate_to_atm_vols and not self.market.atm_vols:
            problems.append("market.atm_vols: required when oil.calibrate_to_atm_vols is set")
        if self.oil.sigma_x + self.oil.sigma_L <= 0.0:
            problems.append("oil: sigma_x + sigma_L must be positive")
        if problems:
            raise ValueError("; ".join(problems))
        return self


@dataclass(frozen=True, eq=False)
class MarketBundle:
    """Raw market data referenced by a RunConfig."""

    zero_curve: ZeroCurve
    forward_quotes: ForwardCurveQuotes
    cds_quotes: Dict[str, CdsQuoteSet]
    atm_vols: Optional[AtmVolQuotes] = None


def _resolve(path: str, base_dir: str) -> str:
    return path if os.path.isabs(path) else os.path.normpath(os.path.join(base_dir, path))


def _resolve_paths(raw: dict, base_dir: str) -> dict:
    market = raw.get("market")
    if isinstance(market, dict):
        for key in ("zero_curve", "forward_curve", "atm_vols"):
            if isinstance(market.get(key), str):
                market[key] = _resolve(market[key], base_dir)
    counterparties = raw.get("counterparties")
    if isinstance(counterparties, dict):
        for section in counterparties.values():
            if isinstance(section, dict) and isinstance(section.get("cds_quotes"), str):
                section["cds_quotes"] = _resolve(section["cds_quotes"], base_dir)
    if isinstance(raw.get("reference_cva"), str):
        raw["reference_cva"] = _resolve(raw["reference_cva"], base_dir)
    output_dir = raw.get("output_dir", "output")
    if isinstance(output_dir, str):
        raw["output_dir"] = _resolve(output_dir, base_dir)
    return raw


def _validation_problems(error: ValidationError) -> List[str]:
    problems = []
    for item in error.errors():
        location = ".".join(str(part) for part in item.get("loc", ()))
        message = item.get("msg", "invalid value")
        if item.get("type") == "value_error":
            message = message.replace("Value error, ", "", 1)
        for part in message.split("; "):
            problems.append(f"{location}: {part}" if location else part)
    return problems


def load_config(config_path: str = DEFAULT_CONFIG_PATH) -> RunConfig:
    """
    Loads and validates the run configuration using pydantic.

    Relative paths are resolved against the configuration file's directory and
    the seed can be overridden through the CRCVA_SEED environment variable.

    Parameters:
        config_path (str): The path to the configuration file.

    Returns:
        RunConfig: The validated configuration with absolute paths.

    Raises:
        ConfigError: Missing file, JSON syntax error (with line and column) or every validation problem.
    """
    if not os.path.exists(config_path):
        raise ConfigError([f"Configuration file '{config_path}' not found."])
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError([f"{config_path}:{e.lineno}:{e.colno}: {e.msg}"])
    if not isinstance(raw, dict):
        raise ConfigError([f"{config_path}: top level must be a JSON object"])

    raw = _resolve_paths(raw, os.path.dirname(os.path.abspath(config_path)))
    seed_override = os.getenv(SEED_ENV)
    if seed_override is not None:
        try:
            raw.setdefault("simulation", {})["seed"] = int(seed_override)
        except ValueError:
            raise ConfigError([f"{SEED_ENV}: not an integer ({seed_override!r})"])
    try:
        config = RunConfig(**raw)
    except ValidationError as ve:
        raise ConfigError([f"{config_path}: {p}" for p in _validation_problems(ve)])
    logger.debug(f"Configuration loaded and validated from '{config_path}'.")
    return config


def load_market_bundle(config: RunConfig) -> MarketBundle:
    """
    Reads every market file, collecting the problems of all files before failing.

    Raises:
        ConfigError: Every unreadable file or invalid field, file by file.
    """
    problems: List[str] = []

    def attempt(label: str, loader, *args, **kwargs):
        try:
            return loader(*args, **kwargs)
        except ConfigError as e:
            problems.extend(f"{label}: {p}" for p in e.problems)
            return None

    zero_curve = attempt("market.zero_curve", load_zero_curve, config.market.zero_curve)
    forward_quotes = attempt("market.forward_curve", load_forward_curve, config.market.forward_curve)
    atm_vols = None
    if config.market.atm_vols:
        atm_vols = attempt("market.atm_vols", load_atm_vols, config.market.atm_vols)
    cds_quotes = {}
    for side, section in config.counterparties.items():
        cds_quotes[side] = attempt(
            f"counterparties.{side}.cds_quotes",
            load_cds_quotes,
            section.cds_quotes,
            recovery=section.recovery,
            payment_frequency=section.payment_frequency,
        )
    if problems:
        raise ConfigError(problems)
    return MarketBundle(zero_curve, forward_quotes, cds_quotes, atm_vols)


def load_market_config(config_path: str = DEFAULT_CONFIG_PATH) -> Tuple[RunConfig, MarketBundle]:
    """
    Loads the configuration and the market data it references, then echoes the provenance notes.

    Returns:
        Tuple[RunConfig, MarketBundle]: Validated configuration and market data.

    Raises:
        ConfigError: Every configuration and market-file problem found.
    """
    config = load_config(config_path)
    bundle = load_market_bundle(config)
    for note in config.provenance:
        logger.info(f"Provenance: {note}")
    logger.info(f"Loaded market data for {', '.join(sorted(bundle.cds_quotes))} from '{config_path}'.")
    return config, bundle


def dump_config(config: RunConfig, config_path: Optional[str] = None) -> str:
    """
    Serializes a validated configuration; load_config on the result gives back an equal RunConfig.

    Parameters:
        config (RunConfig): Validated configuration (paths already absolute).
        config_path (Optional[str]): Where to write the JSON; nothing is written when None.

    Returns:
        str: The JSON document.
    """
    text = json.dumps(config.model_dump(mode="json"), indent=2)
    if config_path:
        parent = os.path.dirname(config_path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(config_path, "w", encoding="utf-8") as f:
            f.write(text + "\n")
        logger.debug(f"Configuration written to '{config_path}'.")
    return text


def market_files(config: RunConfig) -> List[str]:
    """Every market file the calibration reads, in a fixed order."""
    files = [config.market.zero_curve, config.market.forward_curve]
    if config.market.atm_vols:
        files.append(config.market.atm_vols)
    files.extend(config.counterparties[side].cds_quotes for side in sorted(config.counterparties))
    return files


def input_fingerprint(config: RunConfig) -> str:
    """
    SHA-256 of everything a calibration depends on: the market, counterparty, oil and
    product settings (the product side aside), the shift policy, the simulation grid the
    credit shift is fit on and the market file contents.
    """
    grid = config.simulation.to_config().time_grid(config.product.to_product())
    payload = {
        "market": config.market.model_dump(mode="json"),
        "counterparties": {side: c.model_dump(mode="json") for side, c in config.counterparties.items()},
        "oil": config.oil.model_dump(mode="json", exclude={"reference_spot_vol"}),
        "product": config.product.model_dump(mode="json", exclude={"side"}),
        "allow_negative_shift": config.allow_negative_shift,
        "grid": [float(t) for t in grid],
    }
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8"))
    for path in market_files(config):
        try:
            with open(path, "rb") as f:
                digest.update(f.read())
        except OSError as e:
            logger.warning(f"Cannot fingerprint '{path}': {e}")
            digest.update(f"missing:{path}".encode("utf-8"))
    return digest.hexdigest()
