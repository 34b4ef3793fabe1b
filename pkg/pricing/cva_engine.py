# pricing/cva_engine.py

import asyncio
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.stats import norm

from market.curves import ZeroCurve
from models.credit_model import (
    UNIFORM_EPS,
    CreditModel,
    cumulative_intensity,
    evolve_cir,
    evolve_cir_euler,
    sample_default_time,
)
from models.oil_model import OilModel, OilParams, OilState, evolve_oil_state, spot_vol, step_correlation
from pricing.pricers import (
    CommoditySwap,
    ForwardContract,
    Product,
    Side,
    product_annuity,
    product_fixed_leg,
    residual_npv,
)
from utils.errors import CorrelationError, DomainError, SimulationError
from utils.helper import MONTHS_PER_YEAR, locate_on_grid, merge_grids, simulation_grid
from utils.partition import PathChunk, chunk_paths

logger = logging.getLogger(__name__)

DEFAULT_SEED = 20090301
DEFAULT_PATHS = 200_000
DEFAULT_CHUNK_SIZE = 20_000
DEFAULT_LGD = 0.6
PSD_TOLERANCE = 1e-12

RESULT_COLUMNS = [
    "scenario_id",
    "rho_bar",
    "oil_vol_mult",
    "cir_vol_mult",
    "side",
    "cva_usd",
    "std_error",
    "cva_pct",
    "adjusted_strike",
    "sigma_s",
    "nu",
    "estimator",
    "n_paths",
    "status",
]


class Estimator(str, Enum):
    INTENSITY = "intensity"
    INDICATOR = "indicator"


class CirScheme(str, Enum):
    EXACT = "exact"
    EULER = "euler"


def driver_matrix(rho_xL: float, rho_1: float) -> np.ndarray:
    """Correlation of the (x, L, y) Brownian drivers with rho_xy = rho_Ly = rho_1."""
    return np.array([[1.0, rho_xL, rho_1], [rho_xL, 1.0, rho_1], [rho_1, rho_1, 1.0]])


def max_driver_correlation(rho_xL: float) -> float:
    """Largest |rho_1| keeping the driver matrix positive semidefinite."""
    return float(min(1.0, np.sqrt(max(0.5 * (1.0 + rho_xL), 0.0))))


def factorize_correlation(matrix: np.ndarray) -> np.ndarray:
    """
    Lower factor A with A A^T = matrix.

    Cholesky first; a PSD but singular matrix falls back to the symmetric eigen square root.

    Raises:
        SimulationError: The matrix has a negative eigenvalue beyond tolerance.
    """
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(matrix)
        if vals.min() < -PSD_TOLERANCE:
            raise SimulationError(f"Driver correlation matrix is not positive semidefinite (min eigenvalue {vals.min():.3e}).")
        logger.debug(f"Singular driver matrix, eigen factor used (min eigenvalue {vals.min():.3e}).")
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def map_market_correlation(rho_bar: float, p: OilParams) -> float:
    """
    Driver correlation rho_1 giving instantaneous corr(d lambda, d S) = rho_bar.

    Parameters:
        rho_bar (float): Market correlation in [-1, 1].
        p (OilParams): Oil parameters.

    Returns:
        float: rho_1 = rho_bar * sigma_S / (sigma_x + sigma_L).

    Raises:
        DomainError: rho_bar outside [-1, 1] or both oil factors frozen.
        CorrelationError: The implied driver matrix is not positive semidefinite.
    """
    if abs(rho_bar) > 1.0:
        raise DomainError(f"Market correlation must lie in [-1, 1], got {rho_bar}.")
    total = p.sigma_x + p.sigma_L
    if total <= 0.0:
        raise DomainError("Correlation mapping needs sigma_x + sigma_L > 0.")
    ratio = spot_vol(p) / total
    rho_1 = rho_bar * ratio
    bound = max_driver_correlation(p.rho_xL)
    if abs(rho_1) > bound + PSD_TOLERANCE:
        reach = 1.0 if ratio == 0.0 else min(1.0, bound / ratio)
        raise CorrelationError(
            f"rho_bar={rho_bar} maps to rho_1={rho_1:.6f} beyond the admissible {bound:.6f}",
            (-reach, reach),
        )
    return float(np.clip(rho_1, -bound, bound))


@dataclass(frozen=True, eq=False)
class CorrelationSpec:
    """Market credit/commodity correlation with its driver matrix and factor."""

    rho_bar: float
    rho_1: float
    rho_xL: float
    matrix: np.ndarray = field(repr=False)
    factor: np.ndarray = field(repr=False)

    @classmethod
    def from_market(cls, rho_bar: float, p: OilParams) -> "CorrelationSpec":
        rho_1 = map_market_correlation(rho_bar, p)
        matrix = driver_matrix(p.rho_xL, rho_1)
        return cls(rho_bar, rho_1, p.rho_xL, matrix, factorize_correlation(matrix))

    def step_factor(self, p: OilParams, dt: float) -> np.ndarray:
        """
        Factor for one exact step: the (x, L) entry is the exact increment correlation over dt.
        """
        rho_step = step_correlation(p, dt)
        bound = max_driver_correlation(rho_step)
        rho_1 = self.rho_1
        if abs(rho_1) > bound:
            logger.warning(f"Step correlation {rho_step:.4f} caps rho_1 at {bound:.4f} (requested {rho_1:.4f}).")
            rho_1 = float(np.sign(rho_1) * bound)
        return factorize_correlation(driver_matrix(rho_step, rho_1))


@dataclass(frozen=True)
class SimulationConfig:
    """
    Monte Carlo set-up.

    Parameters:
        n_paths (int): Number of paths, even when antithetic.
        grid (Optional[Tuple[float, ...]]): Simulation grid from 0; None means monthly to the product maturity.
        seed (int): Root seed.
        estimator (Estimator): Intensity-weighted or default-indicator estimator.
        antithetic (bool): Pair every path with its sign-flipped twin.
        lgd (float): Loss given default.
        cir_scheme (CirScheme): Exact noncentral chi-square or full-truncation Euler.
        n_workers (int): Concurrent chunk workers.
        chunk_size (int): Paths per chunk; fixes the random substreams.
    """

    n_paths: int = DEFAULT_PATHS
    grid: Optional[Tuple[float, ...]] = None
    seed: int = DEFAULT_SEED
    estimator: Estimator = Estimator.INTENSITY
    antithetic: bool = True
    lgd: float = DEFAULT_LGD
    cir_scheme: CirScheme = CirScheme.EXACT
    n_workers: int = 1
    chunk_size: int = DEFAULT_CHUNK_SIZE

    def __post_init__(self):
        object.__setattr__(self, "estimator", Estimator(self.estimator))
        object.__setattr__(self, "cir_scheme", CirScheme(self.cir_scheme))
        if self.n_paths < 1:
            raise DomainError("n_paths must be at least 1.")
        if self.antithetic and self.n_paths % 2:
            raise DomainError("Antithetic sampling needs an even number of paths.")
        if not 0.0 <= self.lgd <= 1.0:
            raise DomainError(f"lgd must lie in [0, 1], got {self.lgd}.")
        if self.n_workers < 1 or self.chunk_size < 2:
            raise DomainError("n_workers must be >= 1 and chunk_size >= 2.")
        if self.grid is not None:
            grid = tuple(float(t) for t in self.grid)
            if len(grid) < 2 or grid[0] != 0.0 or np.any(np.diff(grid) <= 0.0):
                raise DomainError("Simulation grid must start at 0 and be strictly increasing.")
            object.__setattr__(self, "grid", grid)

    def time_grid(self, product: Product) -> np.ndarray:
        if self.grid is not None:
            return np.array(self.grid)
        return merge_grids(simulation_grid(_horizon_months(product) / MONTHS_PER_YEAR), product.payment_times)


def _horizon_months(product: Product) -> int:
    return int(np.ceil(product.maturity * MONTHS_PER_YEAR - 1e-9))


@dataclass(frozen=True, eq=False)
class JointPathEnsemble:
    """
    Simulated factors on a common grid, paths along axis 0.

    With antithetic sampling path i + n/2 is the mirror of path i.
    """

    times: np.ndarray
    x: np.ndarray
    L: np.ndarray
    y: np.ndarray
    Lambda: np.ndarray
    xi: np.ndarray
    antithetic: bool = False

    @property
    def n_paths(self) -> int:
        return self.x.shape[0]

    def default_times(self) -> np.ndarray:
        return sample_default_time(self.times, self.Lambda, self.xi)

    def oil_state(self, index: int) -> OilState:
        return OilState(self.x[:, index], self.L[:, index], float(self.times[index]))


@dataclass(frozen=True)
class CvaResult:
    """Adjustment for one scenario plus everything the report prints next to it."""

    cva: float
    std_error: float
    cva_pct: float
    adjusted_strike: float
    side: str
    rho_bar: float = 0.0
    oil_vol_mult: float = 1.0
    cir_vol_mult: float = 1.0
    spot_vol: float = float("nan")
    intensity_vol: float = float("nan")
    estimator: str = Estimator.INTENSITY.value
    n_paths: int = 0
    scenario_id: str = ""
    status: str = "ok"
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def as_row(self) -> Dict[str, object]:
        return {
            "scenario_id": self.scenario_id,
            "rho_bar": self.rho_bar,
            "oil_vol_mult": self.oil_vol_mult,
            "cir_vol_mult": self.cir_vol_mult,
            "side": self.side,
            "cva_usd": self.cva,
            "std_error": self.std_error,
            "cva_pct": self.cva_pct,
            "adjusted_strike": self.adjusted_strike,
            "sigma_s": self.spot_vol,
            "nu": self.intensity_vol,
            "estimator": self.estimator,
            "n_paths": self.n_paths,
            "status": self.status if self.error is None else f"{self.status}: {self.error}",
        }

    @classmethod
    def failed(cls, side: str, error: str, **metadata) -> "CvaResult":
        nan = float("nan")
        return cls(nan, nan, nan, nan, side, status="failed", error=error, **metadata)


def adjusted_strike(K: float, cva: float, annuity: float, side: Side) -> float:
    """
    Strike whose default-free value change equals the adjustment.

    Parameters:
        K (float): Contract strike.
        cva (float): Adjustment in USD.
        annuity (float): Value of one USD per barrel on the fixed leg.
        side (Side): Payer lowers the strike, receiver raises it.

    Returns:
        float: Adjusted strike.
    """
    if annuity <= 0.0:
        raise DomainError("Annuity must be positive.")
    shift = cva / annuity
    return K - shift if Side(side) is Side.PAYER else K + shift


def simulate_joint_paths(
    config: SimulationConfig,
    oil_model: OilModel,
    credit_model: CreditModel,
    corr: CorrelationSpec,
    times: Optional[np.ndarray] = None,
    n_paths: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> JointPathEnsemble:
    """
    Joint exact simulation of (x, L) and the CIR++ intensity with correlated drivers.

    The correlated y normal is mapped through its CDF to the uniform of the
    noncentral chi-square step, so the CIR marginal stays exact. The copula keeps
    rank dependence, not Pearson correlation: over one step the realised
    correlation between the oil log-increment and y is the driver correlation
    times corr(Z, g(Z)), g being the chi-square quantile map. The factor is close
    to one away from zero and drops (about 0.88 at y = 0 for the airline
    parameters) where g is most skewed. The Euler scheme has no such loss.

    Parameters:
        config (SimulationConfig): Simulation settings.
        oil_model (OilModel): Calibrated oil model.
        credit_model (CreditModel): Calibrated CIR++ model.
        corr (CorrelationSpec): Driver correlation.
        times (Optional[np.ndarray]): Grid; defaults to config.grid.
        n_paths (Optional[int]): Paths in this batch; defaults to config.n_paths.
        rng (Optional[np.random.Generator]): Random source; defaults to one seeded by config.seed.

    Returns:
        JointPathEnsemble: Paths of shape (n_paths, len(times)).
    """
    if times is None:
        if config.grid is None:
            raise SimulationError("No simulation grid given.")
        times = np.array(config.grid)
    times = np.asarray(times, dtype=float)
    n = config.n_paths if n_paths is None else n_paths
    rng = np.random.default_rng(config.seed) if rng is None else rng
    if config.antithetic and n % 2:
        raise SimulationError("Antithetic batches need an even number of paths.")
    n_draw = n // 2 if config.antithetic else n

    p_oil, p_cir = oil_model.params, credit_model.params
    n_steps = times.size - 1
    x = np.empty((n, times.size))
    L = np.empty((n, times.size))
    y = np.empty((n, times.size))
    x[:, 0], L[:, 0], y[:, 0] = oil_model.x0, oil_model.L0, p_cir.y0
    state = OilState(np.full(n, oil_model.x0), np.full(n, oil_model.L0), 0.0)
    y_state = np.full(n, p_cir.y0)
    factors: Dict[float, np.ndarray] = {}

    for i in range(n_steps):
        dt = float(times[i + 1] - times[i])
        key = round(dt, 12)
        if key not in factors:
            factors[key] = corr.step_factor(p_oil, dt)
        z = rng.standard_normal((n_draw, 3)) @ factors[key].T
        if config.antithetic:
            z = np.concatenate((z, -z))
        state = evolve_oil_state(p_oil, state, dt, (z[:, 0], z[:, 1]))
        if config.cir_scheme is CirScheme.EXACT:
            y_state = evolve_cir(p_cir, y_state, dt, norm.cdf(z[:, 2]))
            y[:, i + 1] = y_state
        else:
            y_state = evolve_cir_euler(p_cir, y_state, dt, z[:, 2])
            y[:, i + 1] = np.maximum(y_state, 0.0)
        x[:, i + 1], L[:, i + 1] = state.x, state.L

    u = np.clip(rng.random(n_draw), UNIFORM_EPS, 1.0 - UNIFORM_EPS)
    if config.antithetic:
        u = np.concatenate((u, 1.0 - u))
    xi = -np.log(u)
    Lambda = cumulative_intensity(times, y, credit_model.shift)
    return JointPathEnsemble(times, x, L, y, Lambda, xi, config.antithetic)


def bucket_dates(product: Product, times: np.ndarray) -> np.ndarray:
    """Default buckets: swap payment dates, or every grid date up to a forward's maturity."""
    if isinstance(product, CommoditySwap):
        return product.payment_times
    return times[(times > 0.0) & (times <= product.maturity + 1e-10)]


def path_contributions(
    product: Product,
    ensemble: JointPathEnsemble,
    config: SimulationConfig,
    oil_model: OilModel,
    curve: ZeroCurve,
) -> np.ndarray:
    """
    Per-path discounted loss LGD sum_j D(0,T_j) w_j (NPV_j)^+.

    w_j is the conditional default probability e^{-Lambda(T_{j-1})} - e^{-Lambda(T_j)}
    for the intensity estimator, or the bucket default indicator otherwise.

    Raises:
        SimulationError: A bucket date is not on the simulation grid.
    """
    dates = bucket_dates(product, ensemble.times)
    if isinstance(product, ForwardContract) and not np.isclose(dates[-1], product.maturity, atol=1e-10):
        raise SimulationError(f"Forward maturity {product.maturity} is not on the simulation grid.")
    idx = locate_on_grid(ensemble.times, dates)
    if np.any(idx < 0):
        missing = dates[idx < 0]
        raise SimulationError(f"Payment dates missing from the simulation grid: {missing[:5].tolist()}.")
    edges = np.concatenate(([0], idx))

    if config.estimator is Estimator.INTENSITY:
        survival = np.exp(-ensemble.Lambda[:, edges])
        weights = survival[:, :-1] - survival[:, 1:]
    else:
        tau = ensemble.default_times()
        edge_times = ensemble.times[edges]
        weights = ((tau[:, None] > edge_times[:-1]) & (tau[:, None] <= edge_times[1:])).astype(float)

    total = np.zeros(ensemble.n_paths)
    for j, grid_index in enumerate(idx):
        T_j = float(ensemble.times[grid_index])
        npv = residual_npv(product, oil_model, ensemble.oil_state(grid_index), curve)
        total += curve.discount_factor(T_j) * weights[:, j] * np.maximum(npv, 0.0)
    return config.lgd * total


def _samples(contributions: np.ndarray, antithetic: bool) -> np.ndarray:
    if not antithetic:
        return contributions
    half = contributions.size // 2
    return 0.5 * (contributions[:half] + contributions[half:])


def _summarize(
    samples: np.ndarray,
    product: Product,
    curve: ZeroCurve,
    config: SimulationConfig,
    oil_model: OilModel,
    credit_model: CreditModel,
    corr: CorrelationSpec,
) -> CvaResult:
    cva = float(np.mean(samples))
    std_error = float(np.std(samples, ddof=1) / np.sqrt(samples.size)) if samples.size > 1 else float("nan")
    fixed_leg = product_fixed_leg(product, curve)
    cva_pct = 100.0 * cva / fixed_leg if fixed_leg > 0.0 else float("nan")
    return CvaResult(
        cva=cva,
        std_error=std_error,
        cva_pct=cva_pct,
        adjusted_strike=adjusted_strike(product.strike, cva, product_annuity(product, curve), product.side),
        side=Side(product.side).value,
        rho_bar=corr.rho_bar,
        spot_vol=spot_vol(oil_model.params),
        intensity_vol=credit_model.params.nu,
        estimator=config.estimator.value,
        n_paths=config.n_paths,
    )


def cva_bucketed(
    product: Product,
    ensemble: JointPathEnsemble,
    config: SimulationConfig,
    oil_model: OilModel,
    credit_model: CreditModel,
    curve: ZeroCurve,
    corr: CorrelationSpec,
) -> CvaResult:
    """
    Bucketed CVA of one product over a simulated ensemble.

    Returns:
        CvaResult: Mean discounted loss with its standard error (over antithetic pairs when paired).
    """
    contributions = path_contributions(product, ensemble, config, oil_model, curve)
    samples = _samples(contributions, ensemble.antithetic)
    return _summarize(samples, product, curve, config, oil_model, credit_model, corr)


def chunk_rng(seed: int, chunk: PathChunk) -> np.random.Generator:
    """Independent substream per chunk index."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk.index,)))


def _run_chunk(
    chunk: PathChunk,
    product: Product,
    oil_model: OilModel,
    credit_model: CreditModel,
    curve: ZeroCurve,
    corr: CorrelationSpec,
    config: SimulationConfig,
    times: np.ndarray,
) -> np.ndarray:
    ensemble = simulate_joint_paths(
        config, oil_model, credit_model, corr, times=times, n_paths=chunk.size, rng=chunk_rng(config.seed, chunk)
    )
    samples = _samples(path_contributions(product, ensemble, config, oil_model, curve), config.antithetic)
    logger.debug(f"Chunk {chunk.index} done ({chunk.size} paths).")
    return samples


async def run_cva_async(
    product: Product,
    oil_model: OilModel,
    credit_model: CreditModel,
    curve: ZeroCurve,
    corr: CorrelationSpec,
    config: SimulationConfig,
) -> CvaResult:
    """
    Chunked CVA run; up to config.n_workers chunks run concurrently on threads.

    Chunks are gathered in index order, so the result does not depend on the worker count.
    """
    times = config.time_grid(product)
    chunks = chunk_paths(config.n_paths, config.chunk_size, config.antithetic)
    semaphore = asyncio.Semaphore(config.n_workers)

    async def run(chunk: PathChunk) -> np.ndarray:
        async with semaphore:
            return await asyncio.to_thread(
                _run_chunk, chunk, product, oil_model, credit_model, curve, corr, config, times
            )

    parts: List[np.ndarray] = await asyncio.gather(*(run(chunk) for chunk in chunks))
    result = _summarize(np.concatenate(parts), product, curve, config, oil_model, credit_model, corr)
    logger.info(
        f"CVA {result.side} rho_bar={corr.rho_bar:+.3f}: {result.cva:.4f} +/- {result.std_error:.4f} "
        f"({config.n_paths} paths, {len(chunks)} chunks)"
    )
    return result


def run_cva(
    product: Product,
    oil_model: OilModel,
    credit_model: CreditModel,
    curve: ZeroCurve,
    corr: CorrelationSpec,
    config: SimulationConfig,
) -> CvaResult:
    """
    Synchronous CVA run: chunks in order on the calling thread when n_workers == 1.

    Parameters:
        product (Product): Forward or swap.
        oil_model (OilModel): Calibrated oil model.
        credit_model (CreditModel): Calibrated CIR++ model of the counterparty.
        curve (ZeroCurve): Discount curve.
        corr (CorrelationSpec): Credit/commodity correlation.
        config (SimulationConfig): Simulation settings.

    Returns:
        CvaResult: The adjustment with its standard error.
    """
    if config.n_workers > 1:
        return asyncio.run(run_cva_async(product, oil_model, credit_model, curve, corr, config))
    times = config.time_grid(product)
    parts = [
        _run_chunk(chunk, product, oil_model, credit_model, curve, corr, config, times)
        for chunk in chunk_paths(config.n_paths, config.chunk_size, config.antithetic)
    ]
    result = _summarize(np.concatenate(parts), product, curve, config, oil_model, credit_model, corr)
    logger.info(f"CVA {result.side} rho_bar={corr.rho_bar:+.3f}: {result.cva:.4f} +/- {result.std_error:.4f}")
    return result
