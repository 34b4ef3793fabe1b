# utils/helper.py

import logging
from typing import Iterable

import numpy as np

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

MONTHS_PER_YEAR = 12


def configure_logging(level: str = "INFO") -> None:
    """
    Configures the root logger for command-line runs.

    Parameters:
        level (str): Logging level name, e.g. 'DEBUG' or 'INFO'.
    """
    numeric_level = getattr(logging, level.upper(), None)
    if not isinstance(numeric_level, int):
        numeric_level = logging.INFO
    logging.basicConfig(level=numeric_level, format=LOG_FORMAT, force=True)


def payment_grid(maturity: float, frequency: int = MONTHS_PER_YEAR) -> np.ndarray:
    """
    Builds the regular payment dates 1/f, 2/f, ..., maturity (year fractions).

    Parameters:
        maturity (float): Final date in years.
        frequency (int): Payments per year.

    Returns:
        np.ndarray: Strictly increasing payment times, the last one equal to maturity.
    """
    n_periods = int(round(maturity * frequency))
    if n_periods < 1 or not np.isclose(n_periods / frequency, maturity):
        raise ValueError(f"Maturity {maturity} is not a whole number of 1/{frequency} periods.")
    return np.arange(1, n_periods + 1, dtype=float) / frequency


def simulation_grid(horizon: float, frequency: int = MONTHS_PER_YEAR) -> np.ndarray:
    """Grid 0, 1/f, ..., horizon used for path simulation."""
    return np.concatenate(([0.0], payment_grid(horizon, frequency)))


def merge_grids(*grids: Iterable[float], decimals: int = 12) -> np.ndarray:
    """
    Merges time grids, dropping points that coincide up to `decimals`.

    Returns:
        np.ndarray: Sorted union of the inputs.
    """
    merged = np.concatenate([np.asarray(list(g), dtype=float) for g in grids])
    _, unique_idx = np.unique(np.round(merged, decimals), return_index=True)
    return np.sort(merged[unique_idx])


def locate_on_grid(grid: np.ndarray, times: np.ndarray, atol: float = 1e-10) -> np.ndarray:
    """
    Returns the grid index of each time; -1 where a time is not a grid point.
    """
    grid = np.asarray(grid, dtype=float)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    idx = np.clip(np.searchsorted(grid, times), 0, len(grid) - 1)
    # neighbour to the left may be closer
    left = np.clip(idx - 1, 0, len(grid) - 1)
    idx = np.where(np.abs(grid[left] - times) < np.abs(grid[idx] - times), left, idx)
    return np.where(np.abs(grid[idx] - times) <= atol, idx, -1)
