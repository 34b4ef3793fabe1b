# pricing/pricers.py

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.stats import norm

from market.curves import HazardCurve, ZeroCurve, survival_probability
from models.oil_model import OilModel, OilState, log_variance, transition_moments, _cov_xL, _var_L, _var_x
from utils.errors import DomainError
from utils.helper import payment_grid

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

TIME_TOLERANCE = 1e-12
QUADRATURE_NODES = 64


class Side(str, Enum):
    PAYER = "payer"
    RECEIVER = "receiver"

    @property
    def sign(self) -> float:
        return 1.0 if self is Side.PAYER else -1.0


@dataclass(frozen=True)
class ForwardContract:
    """Buy (payer) or sell (receiver) `notional` barrels at `strike` on `maturity`."""

    maturity: float
    strike: float
    side: Side = Side.PAYER
    notional: float = 1.0

    def __post_init__(self):
        if not self.maturity > 0.0:
            raise DomainError("Forward maturity must be positive.")
        if not self.notional > 0.0:
            raise DomainError("Forward notional must be positive.")
        object.__setattr__(self, "side", Side(self.side))

    @property
    def payment_times(self) -> np.ndarray:
        return np.array([self.maturity])


@dataclass(frozen=True, eq=False)
class CommoditySwap:
    """Fixed-for-floating commodity swap paying alpha_i (S(T_i) - K) to the payer at each T_i."""

    payment_times: np.ndarray
    notionals: np.ndarray
    strike: float
    side: Side = Side.PAYER

    def __post_init__(self):
        times = np.array(self.payment_times, dtype=float).reshape(-1)
        alphas = np.broadcast_to(np.asarray(self.notionals, dtype=float), times.shape).copy()
        if times.size == 0 or times[0] <= 0.0 or np.any(np.diff(times) <= 0.0):
            raise DomainError("Swap payment times must be positive and strictly increasing.")
        if np.any(alphas <= 0.0):
            raise DomainError("Swap notionals must be positive.")
        times.setflags(write=False)
        alphas.setflags(write=False)
        object.__setattr__(self, "payment_times", times)
        object.__setattr__(self, "notionals", alphas)
        object.__setattr__(self, "side", Side(self.side))

    @classmethod
    def regular(
        cls, maturity: float, strike: float, side: Side = Side.PAYER, notional: float = 1.0, frequency: int = 12
    ) -> "CommoditySwap":
        times = payment_grid(maturity, frequency)
        return cls(times, np.full(times.size, notional), strike, side)

    @property
    def maturity(self) -> float:
        return float(self.payment_times[-1])

    def remaining(self, t: float) -> np.ndarray:
        """Mask of payments strictly after t."""
        return self.payment_times > t + TIME_TOLERANCE

    def with_strike(self, strike: float) -> "CommoditySwap":
        return CommoditySwap(self.payment_times, self.notionals, strike, self.side)


Product = Union[ForwardContract, CommoditySwap]


def _log_forwards(model: OilModel, state: OilState, maturities: np.ndarray) -> np.ndarray:
    """ln F(t, T_i) with the maturities along the last axis."""
    p = model.params
    tau = maturities - state.t
    return (
        np.multiply.outer(np.asarray(state.x, dtype=float), np.exp(-p.k_x * tau))
        + np.asarray(state.L, dtype=float)[..., None]
        + p.mu_L * tau
        + model.shift(maturities)
        + 0.5 * log_variance(p, tau)
    )


def forward_value(c: ForwardContract, model: OilModel, state: OilState, curve: ZeroCurve) -> ArrayLike:
    """
    D(t,T)(F(t,T) - K) times notional for the payer; the receiver gets its negation.

    Raises:
        DomainError: If t > T.
    """
    if state.t > c.maturity + TIME_TOLERANCE:
        raise DomainError(f"Valuation time {state.t} is after forward maturity {c.maturity}.")
    fwd = np.exp(_log_forwards(model, state, np.array([c.maturity]))[..., 0])
    value = c.side.sign * c.notional * curve.forward_discount(state.t, c.maturity) * (fwd - c.strike)
    return float(value) if np.ndim(value) == 0 else value


def option_on_forward(
    model: OilModel,
    state: OilState,
    T: float,
    T_j: float,
    K: float,
    curve: ZeroCurve,
    side: Side = Side.PAYER,
) -> ArrayLike:
    """
    E_t[D(t,T_j) (Fwd(T_j,T;K))^+] per barrel: an option exercised at T_j on the forward to T.

    The receiver side prices (K - F)^+ through the Gaussian complement.

    Parameters:
        model (OilModel): Calibrated oil model.
        state (OilState): Factors at the valuation time t.
        T (float): Forward maturity.
        T_j (float): Exercise date, t <= T_j <= T.
        K (float): Strike, positive.
        curve (ZeroCurve): Discount curve.
        side (Side): PAYER for (F - K)^+, RECEIVER for (K - F)^+.

    Returns:
        float or np.ndarray: Option value(s).
    """
    t = state.t
    if not (t - TIME_TOLERANCE <= T_j <= T + TIME_TOLERANCE):
        raise DomainError(f"Need t <= T_j <= T, got t={t}, T_j={T_j}, T={T}.")
    if K <= 0.0:
        raise DomainError("Option strike must be positive.")
    side = Side(side)
    p = model.params
    lag = max(T - T_j, 0.0)
    tau_j = max(T_j - t, 0.0)
    mean = (
        np.asarray(state.x, dtype=float) * np.exp(-p.k_x * (T - t))
        + np.asarray(state.L, dtype=float)
        + p.mu_L * (T - t)
        + model.shift(T)
        + 0.5 * log_variance(p, lag)
    )
    var_bar = (
        np.exp(-2.0 * p.k_x * lag) * _var_x(p, tau_j)
        + _var_L(p, tau_j)
        + 2.0 * np.exp(-p.k_x * lag) * _cov_xL(p, tau_j)
    )
    discount = curve.forward_discount(t, T)
    if var_bar <= 1e-300:
        value = discount * np.maximum(side.sign * (np.exp(mean) - K), 0.0)
    else:
        sd = np.sqrt(var_bar)
        d1 = (mean + var_bar - np.log(K)) / sd
        d2 = (mean - np.log(K)) / sd
        fwd = np.exp(mean + 0.5 * var_bar)
        if side is Side.PAYER:
            value = discount * (fwd * norm.cdf(d1) - K * norm.cdf(d2))
        else:
            value = discount * (K * norm.cdf(-d2) - fwd * norm.cdf(-d1))
    return float(value) if np.ndim(value) == 0 else value


def swap_value(s: CommoditySwap, model: OilModel, state: OilState, curve: ZeroCurve) -> ArrayLike:
    """Sum of alpha_i Fwd(t, T_i; K) over payments after t, signed by side."""
    mask = s.remaining(state.t)
    if not mask.any():
        return 0.0 if np.ndim(state.x) == 0 else np.zeros(np.shape(state.x))
    times = s.payment_times[mask]
    weights = s.notionals[mask] * curve.forward_discount(state.t, times)
    fwds = np.exp(_log_forwards(model, state, times))
    value = s.side.sign * ((fwds - s.strike) @ weights)
    return float(value) if np.ndim(value) == 0 else value


def annuity(s: CommoditySwap, curve: ZeroCurve, t: float = 0.0) -> float:
    """sum alpha_i D(t, T_i) over payments after t."""
    mask = s.remaining(t)
    return float(np.sum(s.notionals[mask] * curve.forward_discount(t, s.payment_times[mask])))


def fair_strike(s: CommoditySwap, model: OilModel, state: OilState, curve: ZeroCurve) -> ArrayLike:
    """
    Forward swap commodity price: annuity-weighted average of the remaining forwards.
    """
    mask = s.remaining(state.t)
    times = s.payment_times[mask]
    weights = s.notionals[mask] * curve.forward_discount(state.t, times)
    if weights.sum() <= 0.0:
        raise DomainError("Swap annuity must be positive.")
    strike = np.exp(_log_forwards(model, state, times)) @ weights / weights.sum()
    return float(strike) if np.ndim(strike) == 0 else strike


def fixed_leg_value(s: CommoditySwap, curve: ZeroCurve) -> float:
    return s.strike * annuity(s, curve, 0.0)


def product_annuity(product: Product, curve: ZeroCurve) -> float:
    """Value today of one USD per barrel of strike: the adjusted-strike denominator."""
    if isinstance(product, ForwardContract):
        return product.notional * curve.discount_factor(product.maturity)
    return annuity(product, curve, 0.0)


def product_fixed_leg(product: Product, curve: ZeroCurve) -> float:
    return product.strike * product_annuity(product, curve)


def residual_npv(product: Product, model: OilModel, state: OilState, curve: ZeroCurve) -> ArrayLike:
    """Default-free value at state.t of what is still owed, from the product side's view."""
    if isinstance(product, ForwardContract):
        return forward_value(product, model, state, curve)
    return swap_value(product, model, state, curve)


def _lognormal_call(a: np.ndarray, b: float, m: np.ndarray, s: float, side: Side) -> np.ndarray:
    """E[(sign (a e^L - b))^+] for L ~ N(m, s^2), elementwise in a and m."""
    if s <= 1e-150:
        return np.maximum(side.sign * (a * np.exp(m) - b), 0.0)
    with np.errstate(divide="ignore"):
        log_ratio = np.log(b) - np.log(a)
    d1 = (m + s * s - log_ratio) / s
    d2 = (m - log_ratio) / s
    upper = a * np.exp(m + 0.5 * s * s)
    if side is Side.PAYER:
        return upper * norm.cdf(d1) - b * norm.cdf(d2)
    return b * norm.cdf(-d2) - upper * norm.cdf(-d1)


def _swap_expected_exposure(
    s: CommoditySwap, model: OilModel, curve: ZeroCurve, T_j: float, n_nodes: int
) -> float:
    mask = s.remaining(T_j)
    if not mask.any():
        return 0.0
    p = model.params
    times = s.payment_times[mask]
    weights = s.notionals[mask] * curve.forward_discount(T_j, times)
    tau = times - T_j
    # NPV(T_j) = e^{L} a(x) - b with L | x Gaussian: closed form in L, quadrature in x
    c = np.log(weights) + p.mu_L * tau + model.shift(times) + 0.5 * log_variance(p, tau)
    b = s.strike * weights.sum()
    mean, cov = transition_moments(p, 0.0, T_j, model.x0, model.L0)
    var_x = cov[0, 0]
    if var_x <= 1e-300:
        x_nodes, probs = np.array([mean[0]]), np.array([1.0])
        cond_mean, cond_sd = np.array([mean[1]]), np.sqrt(max(cov[1, 1], 0.0))
    else:
        z, w = hermegauss(n_nodes)
        probs = w / np.sqrt(2.0 * np.pi)
        x_nodes = mean[0] + np.sqrt(var_x) * z
        beta = cov[0, 1] / var_x
        cond_mean = mean[1] + beta * (x_nodes - mean[0])
        cond_sd = np.sqrt(max(cov[1, 1] - beta * cov[0, 1], 0.0))
    a = np.exp(np.multiply.outer(x_nodes, np.exp(-p.k_x * tau)) + c).sum(axis=1)
    payoff = _lognormal_call(a, b, cond_mean, cond_sd, s.side)
    return float(curve.discount_factor(T_j) * np.dot(probs, payoff))


def exposure_strip(
    product: Product, model: OilModel, curve: ZeroCurve, bucket_grid: np.ndarray, n_nodes: int = QUADRATURE_NODES
) -> np.ndarray:
    """
    Default-free discounted expected positive exposures E[D(0,T_j) (NPV(T_j))^+] at each bucket date.

    Forwards use the closed-form option on the forward; swaps integrate the
    conditional lognormal payoff over the short-term factor by Gauss-Hermite quadrature.
    """
    grid = _bucket_dates(bucket_grid)
    if isinstance(product, ForwardContract):
        state = model.initial_state
        return np.array(
            [
                product.notional
                * option_on_forward(model, state, product.maturity, t_j, product.strike, curve, product.side)
                for t_j in grid
            ]
        )
    return np.array([_swap_expected_exposure(product, model, curve, t_j, n_nodes) for t_j in grid])


def swap_exposure_strip(
    s: CommoditySwap, model: OilModel, curve: ZeroCurve, bucket_grid: np.ndarray, n_nodes: int = QUADRATURE_NODES
) -> np.ndarray:
    return exposure_strip(s, model, curve, bucket_grid, n_nodes)


def _bucket_dates(bucket_grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(bucket_grid, dtype=float)
    grid = grid[grid > TIME_TOLERANCE]
    if grid.size == 0 or np.any(np.diff(grid) <= 0.0):
        raise DomainError("Bucket grid must be strictly increasing with at least one positive date.")
    return grid


def bucket_default_probabilities(market: HazardCurve, bucket_grid: np.ndarray) -> np.ndarray:
    """Q(T_{j-1} < tau <= T_j) with T_0 = 0."""
    grid = _bucket_dates(bucket_grid)
    edges = np.concatenate(([0.0], grid))
    q = survival_probability(market, edges)
    return q[:-1] - q[1:]


def cva_forward_independent(
    c: ForwardContract,
    bucket_grid: np.ndarray,
    market: HazardCurve,
    lgd: float,
    model: OilModel,
    curve: ZeroCurve,
) -> float:
    """
    Zero-correlation CVA of a forward: LGD sum_j Q(T_{j-1} < tau <= T_j) OptionOnForward(T_j).
    """
    grid = _bucket_dates(bucket_grid)
    if not np.isclose(grid[-1], c.maturity, rtol=0.0, atol=1e-10):
        raise DomainError("Bucket grid must end at the forward maturity.")
    return float(lgd * np.dot(bucket_default_probabilities(market, grid), exposure_strip(c, model, curve, grid)))


def cva_swap_independent(
    s: CommoditySwap,
    bucket_grid: np.ndarray,
    market: HazardCurve,
    lgd: float,
    model: OilModel,
    curve: ZeroCurve,
) -> float:
    """Zero-correlation CVA of a swap from the semi-analytic exposure strip."""
    grid = _bucket_dates(bucket_grid)
    return float(lgd * np.dot(bucket_default_probabilities(market, grid), exposure_strip(s, model, curve, grid)))


def cva_independent(
    product: Product, bucket_grid: np.ndarray, market: HazardCurve, lgd: float, model: OilModel, curve: ZeroCurve
) -> float:
    if isinstance(product, ForwardContract):
        return cva_forward_independent(product, bucket_grid, market, lgd, model, curve)
    return cva_swap_independent(product, bucket_grid, market, lgd, model, curve)


def cva_upper_bound(
    product: Product, bucket_grid: np.ndarray, lgd: float, model: OilModel, curve: ZeroCurve
) -> float:
    """LGD times the undiscounted-by-survival strip of exposures; bounds every bucketed CVA."""
    return float(lgd * exposure_strip(product, model, curve, bucket_grid).sum())


def with_side(product: Product, side: Side) -> Product:
    """Same contract seen from the other (or the same) side."""
    if isinstance(product, ForwardContract):
        return ForwardContract(product.maturity, product.strike, Side(side), product.notional)
    return CommoditySwap(product.payment_times, product.notionals, product.strike, Side(side))
