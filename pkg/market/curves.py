# market/curves.py

import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from utils.errors import DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]

BPS = 1e-4


def _frozen(values: ArrayLike, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values.")
    arr.setflags(write=False)
    return arr


def _check_increasing(tenors: np.ndarray, name: str, allow_empty: bool = False) -> None:
    if tenors.size == 0:
        if allow_empty:
            return
        raise DomainError(f"{name} needs at least one node.")
    if tenors[0] <= 0.0:
        raise DomainError(f"{name} must be positive, got first tenor {tenors[0]}.")
    if np.any(np.diff(tenors) <= 0.0):
        raise DomainError(f"{name} must be strictly increasing.")


def _check_times(t: ArrayLike) -> np.ndarray:
    times = np.asarray(t, dtype=float)
    if np.any(times < 0.0):
        raise DomainError(f"Time must be nonnegative, got {t}.")
    return times


def _as_output(values: np.ndarray, template: ArrayLike):
    return float(values) if np.ndim(template) == 0 else values


@dataclass(frozen=True, eq=False)
class ZeroCurve:
    """
    Continuously compounded zero curve, linear in rate between nodes and flat outside.

    Parameters:
        tenors (ArrayLike): Node tenors in years, strictly increasing and positive.
        zero_rates (ArrayLike): Zero rates per year, decimal.
    """

    tenors: np.ndarray
    zero_rates: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tenors", _frozen(self.tenors, "ZeroCurve tenors"))
        object.__setattr__(self, "zero_rates", _frozen(self.zero_rates, "ZeroCurve zero_rates"))
        _check_increasing(self.tenors, "ZeroCurve tenors")
        if self.tenors.shape != self.zero_rates.shape:
            raise DomainError("ZeroCurve tenors and zero_rates differ in length.")

    @classmethod
    def flat(cls, rate: float, horizon: float = 100.0) -> "ZeroCurve":
        return cls([horizon], [rate])

    def zero_rate(self, t: ArrayLike):
        times = _check_times(t)
        return _as_output(np.interp(times, self.tenors, self.zero_rates), t)

    def discount_factor(self, t: ArrayLike):
        return discount_factor(self, t)

    def forward_discount(self, t: ArrayLike, T: ArrayLike):
        """D(t,T) = D(0,T)/D(0,t) for deterministic rates."""
        return np.asarray(discount_factor(self, T)) / np.asarray(discount_factor(self, t))


def discount_factor(curve: ZeroCurve, t: ArrayLike):
    """
    Discount factor exp(-z(t) t) of the zero curve.

    Parameters:
        curve (ZeroCurve): The discount curve.
        t (ArrayLike): Year fractions, nonnegative.

    Returns:
        float or np.ndarray: Discount factors, 1 at t = 0.
    """
    times = _check_times(t)
    rates = np.interp(times, curve.tenors, curve.zero_rates)
    return _as_output(np.exp(-rates * times), t)


@dataclass(frozen=True, eq=False)
class HazardCurve:
    """
    Piecewise-constant hazard curve: hazard_rates[i] applies on (tenors[i-1], tenors[i]],
    the last rate is extended flat beyond the last tenor.
    """

    tenors: np.ndarray
    hazard_rates: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tenors", _frozen(self.tenors, "HazardCurve tenors"))
        object.__setattr__(self, "hazard_rates", _frozen(self.hazard_rates, "HazardCurve hazard_rates"))
        _check_increasing(self.tenors, "HazardCurve tenors")
        if self.tenors.shape != self.hazard_rates.shape:
            raise DomainError("HazardCurve tenors and hazard_rates differ in length.")
        if np.any(self.hazard_rates < 0.0):
            raise DomainError("HazardCurve hazard rates must be nonnegative.")
        widths = np.diff(np.concatenate(([0.0], self.tenors)))
        cumulative = np.concatenate(([0.0], np.cumsum(self.hazard_rates * widths)))
        cumulative.setflags(write=False)
        object.__setattr__(self, "_nodes", np.concatenate(([0.0], self.tenors)))
        object.__setattr__(self, "_cumulative", cumulative)

    @classmethod
    def flat(cls, hazard: float, horizon: float = 100.0) -> "HazardCurve":
        return cls([horizon], [hazard])

    @classmethod
    def from_cumulative(cls, tenors: ArrayLike, cumulative_hazard: ArrayLike) -> "HazardCurve":
        tenors = np.asarray(tenors, dtype=float)
        cumulative = np.concatenate(([0.0], np.asarray(cumulative_hazard, dtype=float)))
        widths = np.diff(np.concatenate(([0.0], tenors)))
        return cls(tenors, np.diff(cumulative) / widths)

    @property
    def cumulative_at_nodes(self) -> np.ndarray:
        """Lambda^mkt at the tenors."""
        return self._cumulative[1:]

    def cumulative_hazard(self, t: ArrayLike):
        times = _check_times(t)
        inside = np.interp(times, self._nodes, self._cumulative)
        beyond = self._cumulative[-1] + self.hazard_rates[-1] * (times - self.tenors[-1])
        return _as_output(np.where(times > self.tenors[-1], beyond, inside), t)

    def survival_probability(self, t: ArrayLike):
        return survival_probability(self, t)

    def default_probability(self, t0: ArrayLike, t1: ArrayLike):
        """Q(t0 < tau <= t1)."""
        return np.asarray(survival_probability(self, t0)) - np.asarray(survival_probability(self, t1))


def survival_probability(h: HazardCurve, t: ArrayLike):
    """
    Market survival probability Q(tau > t) = exp(-Lambda^mkt(t)).

    Parameters:
        h (HazardCurve): Stripped hazard curve.
        t (ArrayLike): Year fractions, nonnegative.

    Returns:
        float or np.ndarray: Survival probabilities in (0, 1].
    """
    return _as_output(np.exp(-np.asarray(h.cumulative_hazard(t))), t)


@dataclass(frozen=True, eq=False)
class CdsQuoteSet:
    """Running-spread CDS quotes for one reference entity."""

    maturities: np.ndarray
    spreads: np.ndarray
    recovery: float = 0.4
    payment_frequency: int = 4

    def __post_init__(self):
        object.__setattr__(self, "maturities", _frozen(self.maturities, "CDS maturities"))
        object.__setattr__(self, "spreads", _frozen(self.spreads, "CDS spreads"))
        _check_increasing(self.maturities, "CDS maturities")
        if self.maturities.shape != self.spreads.shape:
            raise DomainError("CDS maturities and spreads differ in length.")
        if np.any(self.spreads < 0.0):
            raise DomainError("CDS spreads must be nonnegative.")
        if not 0.0 <= self.recovery < 1.0:
            raise DomainError(f"Recovery must lie in [0, 1), got {self.recovery}.")
        if self.payment_frequency < 1:
            raise DomainError("CDS payment frequency must be at least 1 per year.")

    @classmethod
    def from_bps(cls, maturities: ArrayLike, spreads_bps: ArrayLike, **kwargs) -> "CdsQuoteSet":
        return cls(maturities, np.asarray(spreads_bps, dtype=float) * BPS, **kwargs)

    @property
    def lgd(self) -> float:
        return 1.0 - self.recovery

    def scaled(self, factor: float) -> "CdsQuoteSet":
        return CdsQuoteSet(self.maturities, self.spreads * factor, self.recovery, self.payment_frequency)


@dataclass(frozen=True, eq=False)
class ForwardCurveQuotes:
    """Futures/forward quotes F^M(0,T) in USD per barrel."""

    maturities: np.ndarray
    prices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "maturities", _frozen(self.maturities, "Forward maturities"))
        object.__setattr__(self, "prices", _frozen(self.prices, "Forward prices"))
        _check_increasing(self.maturities, "Forward maturities")
        if self.maturities.shape != self.prices.shape:
            raise DomainError("Forward maturities and prices differ in length.")
        if np.any(self.prices <= 0.0):
            raise DomainError("Forward prices must be strictly positive.")

    def scaled(self, factor: float) -> "ForwardCurveQuotes":
        if factor <= 0.0:
            raise DomainError("Forward curve scale factor must be positive.")
        return ForwardCurveQuotes(self.maturities, self.prices * factor)


@dataclass(frozen=True, eq=False)
class AtmVolQuotes:
    """ATM implied volatilities of futures options by expiry."""

    expiries: np.ndarray
    vols: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "expiries", _frozen(self.expiries, "ATM vol expiries"))
        object.__setattr__(self, "vols", _frozen(self.vols, "ATM vols"))
        _check_increasing(self.expiries, "ATM vol expiries")
        if self.expiries.shape != self.vols.shape:
            raise DomainError("ATM vol expiries and vols differ in length.")
        if np.any(self.vols <= 0.0):
            raise DomainError("ATM vols must be strictly positive.")
