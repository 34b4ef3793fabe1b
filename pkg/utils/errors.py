# utils/errors.py

from typing import List, Optional, Sequence, Tuple


class CvaError(Exception):
    """Base class for every error raised by the valuation library."""


class DomainError(CvaError, ValueError):
    """An argument lies outside the domain of the operation."""


class CalibrationError(CvaError):
    """
    A calibration could not produce an admissible result.

    Parameters:
        message (str): Human readable description.
        maturity (Optional[float]): Offending maturity, for curve bootstraps.
        interval (Optional[Tuple[float, float]]): Offending interval, for shift fits.
        best (Optional[object]): Best-so-far result, for optimizers.
    """

    def __init__(
        self,
        message: str,
        maturity: Optional[float] = None,
        interval: Optional[Tuple[float, float]] = None,
        best: Optional[object] = None,
    ):
        super().__init__(message)
        self.maturity = maturity
        self.interval = interval
        self.best = best


class CorrelationError(CvaError):
    """The requested market correlation cannot be reached by the driver matrix."""

    def __init__(self, message: str, feasible_range: Tuple[float, float]):
        super().__init__(f"{message} (feasible rho_bar range [{feasible_range[0]:.6f}, {feasible_range[1]:.6f}])")
        self.feasible_range = feasible_range


class SimulationError(CvaError):
    """Inconsistent simulation set-up, e.g. a payment date missing from the grid."""


class ConfigError(CvaError):
    """
    Configuration could not be loaded or validated.

    All problems found are carried in `problems`, not only the first one.
    """

    def __init__(self, problems: Sequence[str]):
        self.problems: List[str] = list(problems)
        super().__init__("; ".join(self.problems))
