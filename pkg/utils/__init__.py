# utils/__init__.py

from .errors import (
    CvaError,
    DomainError,
    CalibrationError,
    CorrelationError,
    SimulationError,
    ConfigError,
)
from .helper import configure_logging, payment_grid, simulation_grid, merge_grids, locate_on_grid
from .partition import PathChunk, chunk_paths

__all__ = [
    "CvaError",
    "DomainError",
    "CalibrationError",
    "CorrelationError",
    "SimulationError",
    "ConfigError",
    "configure_logging",
    "payment_grid",
    "simulation_grid",
    "merge_grids",
    "locate_on_grid",
    "PathChunk",
    "chunk_paths",
]
