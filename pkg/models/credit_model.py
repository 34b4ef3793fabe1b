# models/credit_model.py

import logging
from dataclasses import dataclass, replace
from typing import Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.stats import chi2, ncx2

from market.cds import cds_model_price
from market.curves import HazardCurve, survival_probability
from utils.errors import CalibrationError, DomainError
from utils.helper import merge_grids

logger = logging.getLogger(__name__)

__all__ = [
    "NO_DEFAULT",
    "CirParams",
    "CreditShift",
    "IntensityPath",
    "CreditModel",
    "cir_zcb_price",
    "model_survival",
    "fit_credit_shift",
    "cir_transition_moments",
    "evolve_cir",
    "evolve_cir_euler",
    "cumulative_intensity",
    "sample_default_time",
    "simulate_intensity",
    "calibrate_credit_model",
    "cds_model_price",
]

ArrayLike = Union[float, np.ndarray]

NO_DEFAULT = np.inf
SHIFT_TOLERANCE = 1e-12
# below this vol-of-intensity the CIR step is the deterministic ODE step
DETERMINISTIC_NU = 1e-6
UNIFORM_EPS = 1e-15


@dataclass(frozen=True)
class CirParams:
    """CIR intensity dy = kappa (mu - y) dt + nu sqrt(y) dZ started at y0."""

    y0: float
    kappa: float
    mu: float
    nu: float

    def __post_init__(self):
        if self.y0 < 0.0:
            raise DomainError(f"y0 must be nonnegative, got {self.y0}.")
        if not (self.kappa > 0.0 and self.mu > 0.0 and self.nu > 0.0):
            raise DomainError("kappa, mu and nu must be positive.")

    @property
    def feller_indicator(self) -> float:
        """2 kappa mu - nu^2; negative means the origin is accessible."""
        return 2.0 * self.kappa * self.mu - self.nu ** 2

    def scale_nu(self, multiplier: float) -> "CirParams":
        if multiplier <= 0.0:
            raise DomainError("Intensity volatility multiplier must be positive.")
        return replace(self, nu=self.nu * multiplier)


@dataclass(frozen=True, eq=False)
class CreditShift:
    """Integrated shift Psi(t) on a grid, linear between nodes and flat beyond."""

    times: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=float).reshape(-1)
        psi = np.array(self.psi, dtype=float).reshape(-1)
        if times.size == 0 or times.shape != psi.shape:
            raise DomainError("CreditShift needs matching, nonempty grids.")
        if times[0] != 0.0 or psi[0] != 0.0:
            raise DomainError("CreditShift must start with Psi(0) = 0.")
        if np.any(np.diff(times) <= 0.0):
            raise DomainError("CreditShift times must be strictly increasing.")
        times.setflags(write=False)
        psi.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "psi", psi)

    @classmethod
    def zero(cls, horizon: float = 100.0) -> "CreditShift":
        return cls([0.0, horizon], [0.0, 0.0])

    def __call__(self, t: ArrayLike) -> ArrayLike:
        value = np.interp(t, self.times, self.psi)
        return float(value) if np.ndim(t) == 0 else value


@dataclass(frozen=True, eq=False)
class IntensityPath:
    times: np.ndarray
    y: np.ndarray
    Lambda: np.ndarray


@dataclass(frozen=True, eq=False)
class CreditModel:
    """CIR++ intensity calibrated to a market hazard curve."""

    params: CirParams
    shift: CreditShift
    market: HazardCurve

    def survival(self, t: ArrayLike) -> ArrayLike:
        return model_survival(self.params, self.shift, t)

    def with_params(self, params: CirParams, allow_negative: bool = False) -> "CreditModel":
        """Same market curve and shift grid, new parameters, Psi refitted."""
        return CreditModel(params, fit_credit_shift(params, self.market, self.shift.times, allow_negative), self.market)


def _cir_b_and_log_a(p: CirParams, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    h = np.sqrt(p.kappa ** 2 + 2.0 * p.nu ** 2)
    decay = np.exp(-h * t)
    one_minus = -np.expm1(-h * t)
    b = 2.0 * one_minus / ((p.kappa + h) + (h - p.kappa) * decay)
    # h - kappa written without cancellation; keeps A accurate as nu -> 0
    delta = 2.0 * p.nu ** 2 / (h + p.kappa)
    bracket = -0.5 * delta * t - np.log1p(-delta * one_minus / (2.0 * h))
    log_a = 2.0 * p.kappa * p.mu / p.nu ** 2 * bracket
    return b, log_a


def cir_zcb_price(p: CirParams, t: ArrayLike) -> ArrayLike:
    """
    E[exp(-Y(t))] for the time-homogeneous CIR process: A(t) exp(-B(t) y0).

    Parameters:
        p (CirParams): CIR parameters.
        t (ArrayLike): Horizon(s), nonnegative.

    Returns:
        float or np.ndarray: Bond price(s) in (0, 1].
    """
    times = np.asarray(t, dtype=float)
    if np.any(times < 0.0):
        raise DomainError("CIR bond horizon must be nonnegative.")
    b, log_a = _cir_b_and_log_a(p, times)
    price = np.exp(log_a - b * p.y0)
    return float(price) if np.ndim(price) == 0 else price


def model_survival(p: CirParams, shift: CreditShift, t: ArrayLike) -> ArrayLike:
    """CIR++ survival exp(-Psi(t)) P^CIR(0,t)."""
    return np.exp(-np.asarray(shift(t))) * np.asarray(cir_zcb_price(p, t))


def fit_credit_shift(
    p: CirParams, market: HazardCurve, grid: np.ndarray, allow_negative: bool = False
) -> CreditShift:
    """
    Psi(t) = ln(P^CIR(0,t) / Q_market(tau > t)) on the grid.

    Parameters:
        p (CirParams): CIR parameters.
        market (HazardCurve): Market survival curve.
        grid (np.ndarray): Nodes; 0 is added when missing.
        allow_negative (bool): Accept a decreasing Psi with a warning instead of rejecting it.

    Raises:
        CalibrationError: Psi decreases on some interval (negative psi).
    """
    times = np.asarray(grid, dtype=float)
    if times[0] != 0.0:
        times = np.concatenate(([0.0], times))
    psi = np.log(cir_zcb_price(p, times)) - np.log(survival_probability(market, times))
    psi[0] = 0.0
    steps = np.diff(psi)
    bad = np.flatnonzero(steps < -SHIFT_TOLERANCE)
    if bad.size:
        interval = (float(times[bad[0]]), float(times[bad[0] + 1]))
        message = (
            f"Negative psi on ({interval[0]:.6g}, {interval[1]:.6g}]: Psi falls by {-steps[bad[0]]:.3e} "
            f"({bad.size} intervals affected) for nu={p.nu}"
        )
        if not allow_negative:
            raise CalibrationError(message, interval=interval)
        logger.warning(f"{message}; accepted.")
    if p.feller_indicator <= 0.0:
        logger.debug(f"Feller condition violated: 2*kappa*mu - nu^2 = {p.feller_indicator:.6f}.")
    return CreditShift(times, psi)


def cir_transition_moments(p: CirParams, y: ArrayLike, dt: float) -> Tuple[ArrayLike, ArrayLike]:
    """Exact conditional mean and variance of y(t + dt) given y(t)."""
    e = np.exp(-p.kappa * dt)
    y = np.asarray(y, dtype=float)
    mean = p.mu + (y - p.mu) * e
    var = y * p.nu ** 2 * e / p.kappa * (1.0 - e) + p.mu * p.nu ** 2 / (2.0 * p.kappa) * (1.0 - e) ** 2
    return mean, var


def evolve_cir(p: CirParams, y: ArrayLike, dt: float, u: ArrayLike) -> np.ndarray:
    """
    Exact CIR step driven by uniforms: scaled noncentral chi-square quantiles.

    Parameters:
        p (CirParams): CIR parameters.
        y (ArrayLike): Current levels, nonnegative.
        dt (float): Step, positive.
        u (ArrayLike): Uniform draws on (0, 1), one per level.

    Returns:
        np.ndarray: Levels at t + dt, always nonnegative.
    """
    if dt <= 0.0:
        raise DomainError("CIR time step must be positive.")
    y = np.maximum(np.asarray(y, dtype=float), 0.0)
    if p.nu < DETERMINISTIC_NU:
        return np.broadcast_to(cir_transition_moments(p, y, dt)[0], np.shape(u)).copy()
    u = np.clip(np.asarray(u, dtype=float), UNIFORM_EPS, 1.0 - UNIFORM_EPS)
    y = np.broadcast_to(y, u.shape)
    e = np.exp(-p.kappa * dt)
    c = 4.0 * p.kappa / (p.nu ** 2 * -np.expm1(-p.kappa * dt))
    df = 4.0 * p.kappa * p.mu / p.nu ** 2
    nc = c * y * e
    out = np.empty(u.shape)
    central = nc <= 0.0
    out[central] = chi2.ppf(u[central], df)
    out[~central] = ncx2.ppf(u[~central], df, nc[~central])
    return out / c


def evolve_cir_euler(p: CirParams, y: ArrayLike, dt: float, z: ArrayLike) -> np.ndarray:
    """Full-truncation Euler step; `y` is the raw (possibly negative) state."""
    y = np.asarray(y, dtype=float)
    y_plus = np.maximum(y, 0.0)
    return y + p.kappa * (p.mu - y_plus) * dt + p.nu * np.sqrt(y_plus * dt) * np.asarray(z)


def cumulative_intensity(times: np.ndarray, y: np.ndarray, shift: CreditShift) -> np.ndarray:
    """
    Lambda(t_i) = Psi(t_i) + trapezoidal integral of y up to t_i (along the last axis).
    """
    times = np.asarray(times, dtype=float)
    integrated = cumulative_trapezoid(np.asarray(y, dtype=float), times, axis=-1, initial=0.0)
    return integrated + shift(times)


def sample_default_time(times: np.ndarray, Lambda: np.ndarray, xi: ArrayLike) -> ArrayLike:
    """
    First time Lambda crosses xi, linear inside the bracketing step.

    Parameters:
        times (np.ndarray): Grid, shape (n,).
        Lambda (np.ndarray): Cumulative intensity, shape (n,) or (paths, n).
        xi (ArrayLike): Unit-mean exponential draws, one per path.

    Returns:
        Default times; NO_DEFAULT (inf) where xi exceeds Lambda at the horizon.
    """
    times = np.asarray(times, dtype=float)
    lam = np.atleast_2d(np.asarray(Lambda, dtype=float))
    xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
    crossed = lam >= xi_arr[:, None]
    hit = crossed.any(axis=1)
    idx = np.where(hit, np.argmax(crossed, axis=1), 0)
    rows = np.arange(lam.shape[0])
    prev = np.maximum(idx - 1, 0)
    lam_hi, lam_lo = lam[rows, idx], lam[rows, prev]
    span = lam_hi - lam_lo
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(span > 0.0, (xi_arr - lam_lo) / span, 1.0)
    tau = times[prev] + np.clip(frac, 0.0, 1.0) * (times[idx] - times[prev])
    tau = np.where(hit, tau, NO_DEFAULT)
    return float(tau[0]) if np.ndim(xi) == 0 and np.ndim(Lambda) == 1 else tau


def simulate_intensity(
    p: CirParams,
    shift: CreditShift,
    times: np.ndarray,
    n_paths: int,
    rng: np.random.Generator,
    scheme: str = "exact",
) -> IntensityPath:
    """
    Simulates the CIR++ intensity alone (no commodity coupling).

    Returns:
        IntensityPath: y of shape (n_paths, len(times)) and the matching Lambda.
    """
    times = np.asarray(times, dtype=float)
    y = np.empty((n_paths, times.size))
    y[:, 0] = p.y0
    state = np.full(n_paths, p.y0)
    for i, dt in enumerate(np.diff(times), start=1):
        if scheme == "exact":
            state = evolve_cir(p, state, dt, rng.random(n_paths))
            y[:, i] = state
        elif scheme == "euler":
            state = evolve_cir_euler(p, state, dt, rng.standard_normal(n_paths))
            y[:, i] = np.maximum(state, 0.0)
        else:
            raise DomainError(f"Unknown CIR scheme '{scheme}'.")
    return IntensityPath(times, y, cumulative_intensity(times, y, shift))


def calibrate_credit_model(
    p: CirParams, market: HazardCurve, grid: np.ndarray, allow_negative: bool = False
) -> CreditModel:
    """
    Fits the CIR++ shift so the model survival reproduces `market` on the grid and its nodes.

    Parameters:
        p (CirParams): CIR parameters.
        market (HazardCurve): Stripped market curve.
        grid (np.ndarray): Simulation grid; the curve nodes are merged in.
        allow_negative (bool): Accept a decreasing Psi with a warning.

    Returns:
        CreditModel: The calibrated bundle.
    """
    nodes = merge_grids([0.0], grid, market.tenors)
    model = CreditModel(p, fit_credit_shift(p, market, nodes, allow_negative), market)
    logger.info(f"Fitted CIR++ shift on {nodes.size} nodes (nu={p.nu}, Feller {p.feller_indicator:+.5f}).")
    return model
