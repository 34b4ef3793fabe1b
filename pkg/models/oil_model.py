# models/oil_model.py

import logging
from dataclasses import dataclass, replace
from typing import Tuple, Union

import numpy as np
from scipy.optimize import least_squares, minimize

from market.curves import AtmVolQuotes, ForwardCurveQuotes
from utils.errors import CalibrationError, DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

CALIBRATION_TOLERANCE = 1e-10
PARAM_BOUNDS = [(1e-6, 50.0), (0.0, 5.0), (0.0, 5.0), (-1.0, 1.0)]


@dataclass(frozen=True)
class OilParams:
    """
    Parameters of the shifted two-factor log-spot model
    ln S = x + L + phi, dx = -k_x x dt + sigma_x dZ_x, dL = mu_L dt + sigma_L dZ_L.
    """

    k_x: float
    sigma_x: float
    sigma_L: float
    rho_xL: float
    mu_L: float = 0.0

    def __post_init__(self):
        if not self.k_x > 0.0:
            raise DomainError(f"k_x must be positive, got {self.k_x}.")
        if self.sigma_x < 0.0 or self.sigma_L < 0.0:
            raise DomainError("Oil factor volatilities must be nonnegative.")
        if abs(self.rho_xL) > 1.0:
            raise DomainError(f"rho_xL must lie in [-1, 1], got {self.rho_xL}.")

    @property
    def spot_vol(self) -> float:
        """Instantaneous volatility of ln S."""
        return spot_vol(self)

    def scale_vols(self, multiplier: float) -> "OilParams":
        if multiplier <= 0.0:
            raise DomainError("Volatility multiplier must be positive.")
        return replace(self, sigma_x=self.sigma_x * multiplier, sigma_L=self.sigma_L * multiplier)


@dataclass(frozen=True)
class OilState:
    x: ArrayLike
    L: ArrayLike
    t: float = 0.0


@dataclass(frozen=True, eq=False)
class OilShift:
    """Deterministic shift phi(T) on a maturity grid, linear in T, flat beyond the last node."""

    maturities: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        maturities = np.array(self.maturities, dtype=float).reshape(-1)
        phi = np.array(self.phi, dtype=float).reshape(-1)
        if maturities.size == 0 or maturities.shape != phi.shape:
            raise DomainError("OilShift needs matching, nonempty maturity and phi grids.")
        if np.any(np.diff(maturities) <= 0.0):
            raise DomainError("OilShift maturities must be strictly increasing.")
        maturities.setflags(write=False)
        phi.setflags(write=False)
        object.__setattr__(self, "maturities", maturities)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def zero(cls, horizon: float = 100.0) -> "OilShift":
        return cls([0.0, horizon], [0.0, 0.0])

    def __call__(self, T: ArrayLike) -> ArrayLike:
        value = np.interp(T, self.maturities, self.phi)
        return float(value) if np.ndim(T) == 0 else value

    def shifted(self, amount: float) -> "OilShift":
        return OilShift(self.maturities, self.phi + amount)


@dataclass(frozen=True)
class GibsonSchwartzParams:
    """Spot / mean-reverting convenience-yield parametrization."""

    k_q: float
    alpha: float
    sigma_S: float
    sigma_q: float
    rho_qS: float
    r: float = 0.0

    def __post_init__(self):
        if not self.k_q > 0.0:
            raise DomainError("k_q must be positive.")
        if self.sigma_S < 0.0 or self.sigma_q < 0.0:
            raise DomainError("Gibson-Schwartz volatilities must be nonnegative.")
        if abs(self.rho_qS) > 1.0:
            raise DomainError("rho_qS must lie in [-1, 1].")


@dataclass(frozen=True, eq=False)
class OilModel:
    """A calibrated oil model: parameters, shift and the initial factor state."""

    params: OilParams
    shift: OilShift
    x0: float = 0.0
    L0: float = 0.0

    @property
    def initial_state(self) -> OilState:
        return OilState(self.x0, self.L0, 0.0)

    def forward(self, T: ArrayLike, state: OilState = None) -> ArrayLike:
        state = self.initial_state if state is None else state
        if np.ndim(T) == 0:
            return forward_price(self.params, self.shift, state, float(T))
        return np.array([forward_price(self.params, self.shift, state, float(m)) for m in np.asarray(T)])

    def with_params(self, params: OilParams, quotes: ForwardCurveQuotes) -> "OilModel":
        """Same initial state, new parameters, shift recalibrated to the quotes."""
        return OilModel(params, calibrate_shift(params, quotes, self.x0, self.L0), self.x0, self.L0)


def _var_x(p: OilParams, tau: ArrayLike) -> ArrayLike:
    return p.sigma_x ** 2 / (2.0 * p.k_x) * -np.expm1(-2.0 * p.k_x * tau)


def _var_L(p: OilParams, tau: ArrayLike) -> ArrayLike:
    return p.sigma_L ** 2 * tau


def _cov_xL(p: OilParams, tau: ArrayLike) -> ArrayLike:
    return p.rho_xL * p.sigma_x * p.sigma_L / p.k_x * -np.expm1(-p.k_x * tau)


def log_variance(p: OilParams, tau: ArrayLike) -> ArrayLike:
    """V over a horizon tau: variance of x + L accumulated over tau."""
    return _var_x(p, tau) + _var_L(p, tau) + 2.0 * _cov_xL(p, tau)


def spot_vol(p: OilParams) -> float:
    return float(np.sqrt(max(p.sigma_x ** 2 + p.sigma_L ** 2 + 2.0 * p.rho_xL * p.sigma_x * p.sigma_L, 0.0)))


def transition_moments(
    p: OilParams, s: float, t: float, x_s: ArrayLike = 0.0, L_s: ArrayLike = 0.0
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Conditional law of (x(t), L(t)) given (x(s), L(s)).

    Parameters:
        p (OilParams): Model parameters.
        s (float): Start time.
        t (float): End time, t >= s.
        x_s, L_s: Factor values at s.

    Returns:
        Tuple[np.ndarray, np.ndarray]: Mean pair and 2x2 covariance.
    """
    if t < s:
        raise DomainError(f"Transition end {t} precedes start {s}.")
    tau = t - s
    mean = np.array([np.asarray(x_s) * np.exp(-p.k_x * tau), np.asarray(L_s) + p.mu_L * tau])
    cov_xl = _cov_xL(p, tau)
    cov = np.array([[_var_x(p, tau), cov_xl], [cov_xl, _var_L(p, tau)]])
    return mean, cov


def step_correlation(p: OilParams, dt: float) -> float:
    """Correlation of the exact (x, L) increments over dt; 0 when a factor is frozen."""
    _, cov = transition_moments(p, 0.0, dt)
    denom = np.sqrt(cov[0, 0] * cov[1, 1])
    return float(cov[0, 1] / denom) if denom > 0.0 else 0.0


def evolve_oil_state(p: OilParams, state: OilState, dt: float, shocks: Tuple[ArrayLike, ArrayLike]) -> OilState:
    """
    One exact Gaussian step of the factors.

    The shocks must already carry the step correlation (see step_correlation).
    """
    if dt < 0.0:
        raise DomainError("Time step must be nonnegative.")
    if dt == 0.0:
        return state
    mean, cov = transition_moments(p, state.t, state.t + dt, state.x, state.L)
    z_x, z_L = shocks
    x = mean[0] + np.sqrt(cov[0, 0]) * np.asarray(z_x)
    L = mean[1] + np.sqrt(cov[1, 1]) * np.asarray(z_L)
    return OilState(x, L, state.t + dt)


def forward_price(p: OilParams, shift: OilShift, state: OilState, T: float) -> ArrayLike:
    """
    Forward price F(t,T) = E[S(T) | x(t), L(t)] with deterministic rates.

    Raises:
        DomainError: If T precedes the state time.
    """
    tau = T - state.t
    if tau < -1e-14:
        raise DomainError(f"Forward maturity {T} precedes valuation time {state.t}.")
    tau = max(tau, 0.0)
    log_fwd = (
        np.asarray(state.x) * np.exp(-p.k_x * tau)
        + np.asarray(state.L)
        + p.mu_L * tau
        + shift(T)
        + 0.5 * log_variance(p, tau)
    )
    value = np.exp(log_fwd)
    return float(value) if np.ndim(value) == 0 else value


def calibrate_shift(p: OilParams, fwd: ForwardCurveQuotes, x0: float, L0: float) -> OilShift:
    """
    Fits phi so the model forward curve at t = 0 hits every market node.

    Before the first quoted maturity phi continues the first segment linearly down to
    T = 0 (flat for a single quote), so the model spot sits on the extrapolated curve.

    Returns:
        OilShift: phi at T = 0 and at the quoted maturities.
    """
    T = fwd.maturities
    phi = np.log(fwd.prices) - x0 * np.exp(-p.k_x * T) - L0 - p.mu_L * T - 0.5 * log_variance(p, T)
    if T[0] > 0.0:
        slope = (phi[1] - phi[0]) / (T[1] - T[0]) if T.size > 1 else 0.0
        T = np.concatenate(([0.0], T))
        phi = np.concatenate(([phi[0] - slope * T[1]], phi))
    logger.debug(f"Calibrated oil shift on {T.size} nodes, phi range [{phi.min():.6f}, {phi.max():.6f}].")
    return OilShift(T, phi)


def map_gibson_schwartz(g: GibsonSchwartzParams) -> OilParams:
    """
    Maps spot/convenience-yield parameters to the short-term/equilibrium factors.

    Raises:
        DomainError: Negative equilibrium variance.
        CalibrationError: sigma_L = 0 with a nonzero correlation numerator.
    """
    ratio = g.sigma_q / g.k_q
    var_L = g.sigma_S ** 2 + ratio ** 2 - 2.0 * g.rho_qS * g.sigma_S * ratio
    if var_L < -1e-14:
        raise DomainError(f"Equilibrium variance is negative ({var_L}).")
    sigma_L = float(np.sqrt(max(var_L, 0.0)))
    numerator = g.sigma_S * g.rho_qS - ratio
    if sigma_L == 0.0:
        if abs(numerator) > 1e-14:
            raise CalibrationError("rho_xL is singular: sigma_L vanishes with a nonzero numerator.")
        rho = 0.0
    else:
        rho = float(np.clip(numerator / sigma_L, -1.0, 1.0))
    return OilParams(
        k_x=g.k_q,
        sigma_x=ratio,
        sigma_L=sigma_L,
        rho_xL=rho,
        mu_L=g.r - g.alpha - 0.5 * g.sigma_S ** 2,
    )


def model_atm_vol(p: OilParams, T: ArrayLike) -> ArrayLike:
    """Black implied vol of an ATM option on the future expiring with the future."""
    expiries = np.asarray(T, dtype=float)
    if np.any(expiries <= 0.0):
        raise DomainError("ATM vol expiry must be positive.")
    vol = np.sqrt(np.maximum(log_variance(p, expiries), 0.0) / expiries)
    return float(vol) if np.ndim(vol) == 0 else vol


def vol_term_structure(p: OilParams, expiries: np.ndarray) -> np.ndarray:
    """(T, vol) pairs as an (n, 2) array."""
    expiries = np.asarray(expiries, dtype=float)
    return np.column_stack((expiries, model_atm_vol(p, expiries)))


def calibrate_oil_params(
    quotes: AtmVolQuotes,
    init: OilParams,
    max_iter: int = 20000,
    tol: float = CALIBRATION_TOLERANCE,
) -> OilParams:
    """
    Least-squares fit of (k_x, sigma_x, sigma_L, rho_xL) to ATM vols; mu_L stays at init.mu_L.

    A bounded Powell search is polished with a finite-difference trust-region least-squares step.

    Raises:
        DomainError: Fewer than four quotes.
        CalibrationError: Neither stage converged; `best` holds the best parameters found.
    """
    if quotes.expiries.size < 4:
        raise DomainError("At least four ATM vol quotes are needed for four free parameters.")

    def to_params(v: np.ndarray) -> OilParams:
        k, sx, sl, rho = (float(c) for c in np.clip(v, lower, upper))
        return OilParams(k, sx, sl, rho, init.mu_L)

    def residuals(v: np.ndarray) -> np.ndarray:
        return model_atm_vol(to_params(v), quotes.expiries) - quotes.vols

    def objective(v: np.ndarray) -> float:
        r = residuals(v)
        return float(np.dot(r, r))

    lower, upper = np.array(PARAM_BOUNDS).T
    x_init = np.array([init.k_x, init.sigma_x, init.sigma_L, init.rho_xL])
    powell = minimize(
        objective,
        x_init,
        method="Powell",
        bounds=PARAM_BOUNDS,
        options={"xtol": tol, "ftol": tol, "maxiter": max_iter},
    )
    polish = least_squares(
        residuals,
        np.clip(powell.x, lower, upper),
        bounds=(lower, upper),
        method="trf",
        x_scale="jac",
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=max_iter,
    )
    polish_fun = 2.0 * float(polish.cost)
    best_x, best_fun = (polish.x, polish_fun) if polish_fun <= powell.fun else (powell.x, float(powell.fun))
    best_params = to_params(best_x)
    logger.debug(f"ATM vol fit: Powell {powell.fun:.3e}, polished {polish_fun:.3e}.")
    if not np.isfinite(best_fun) or not (powell.success or polish.success):
        raise CalibrationError(
            f"ATM vol calibration did not converge (objective {best_fun:.3e}).", best=best_params
        )
    logger.info(
        f"Calibrated oil params k_x={best_params.k_x:.4f} sigma_x={best_params.sigma_x:.4f} "
        f"sigma_L={best_params.sigma_L:.4f} rho_xL={best_params.rho_xL:.4f}"
    )
    return best_params


def calibrate_oil_model(params: OilParams, quotes: ForwardCurveQuotes, x0: float = 0.0, L0: float = None) -> OilModel:
    """
    Builds an OilModel on the quoted curve.

    L0 defaults to the log of the first quoted price so phi stays small.
    """
    L0 = float(np.log(quotes.prices[0])) if L0 is None else L0
    model = OilModel(params, calibrate_shift(params, quotes, x0, L0), x0, L0)
    logger.info(f"Fitted oil shift on {quotes.maturities.size} forward nodes (x0={x0}, L0={L0:.6f}).")
    return model
