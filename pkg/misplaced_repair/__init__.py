"""Detect and repair misplaced subsequences in multivariate sensor time series."""
from __future__ import annotations

from .config import RepairConfigError, RunConfig, load_config
from .coordinator import RepairCoordinator, RepairResult
from .core import (
    InconsistencyInstance,
    MultiSeries,
    RepairReport,
    RepairStructureError,
    RotationPattern,
    TimeInterval,
)
from .files import RepairDataError

__all__ = [
    "InconsistencyInstance",
    "MultiSeries",
    "RepairConfigError",
    "RepairCoordinator",
    "RepairDataError",
    "RepairReport",
    "RepairResult",
    "RepairStructureError",
    "RotationPattern",
    "RunConfig",
    "TimeInterval",
    "load_config",
]
