"""Per-dimension sequence behavior models and membership probabilities."""
from __future__ import annotations

from collections import deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
import logging
import math
from typing import Any

import numpy as np
from scipy.special import erfc

from .const import (
    DEFAULT_SUPPORT_THRESHOLD,
    DEFAULT_VARIANCE_FLOOR,
    DEFAULT_WINDOW_LEN,
    MODEL_RESYNC_EVERY,
)
from .core import MultiSeries, RepairStructureError

_LOGGER = logging.getLogger(__name__)

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ModelConfig:
    """Window length, support threshold and variance floor of the behavior models."""

    window_len: int = DEFAULT_WINDOW_LEN
    support_threshold: float = DEFAULT_SUPPORT_THRESHOLD
    variance_floor: float = DEFAULT_VARIANCE_FLOOR

    def __post_init__(self) -> None:
        """Validate the ranges."""
        if self.window_len < 2:
            raise RepairStructureError(f"window_len must be at least 2, got {self.window_len}")
        if not 0 < self.support_threshold < 1:
            raise RepairStructureError(
                f"support_threshold must lie in (0, 1), got {self.support_threshold}"
            )
        if self.variance_floor <= 0:
            raise RepairStructureError(
                f"variance_floor must be positive, got {self.variance_floor}"
            )


@dataclass(frozen=True)
class Gamma:
    """Statistics of the current window."""

    mean: float
    variance: float
    sample_count: int


class SequenceModel:
    """Windowed Gaussian model of one dimension.

    Missing values (NaN) occupy a window slot but are left out of the statistics.
    Running sums are kept relative to a shift and refitted exactly every
    MODEL_RESYNC_EVERY accepts.
    """

    def __init__(
        self,
        dim: int,
        window_len: int,
        variance_floor: float,
        window: Iterable[float] = (),
    ) -> None:
        """Initialize the model from an initial window."""
        self.dim = dim
        self.window_len = window_len
        self.variance_floor = variance_floor
        self._window: deque[float] = deque(
            (float(value) for value in window), maxlen=window_len
        )
        self._shift = 0.0
        self._sum = 0.0
        self._sum_sq = 0.0
        self._count = 0
        self._since_resync = 0
        self.mean = math.nan
        self.variance = math.nan
        self._resync()
        if self._count < 2:
            raise RepairStructureError(
                f"Dimension {dim} needs at least 2 observed values to fit, got {self._count}"
            )

    @property
    def gamma(self) -> Gamma:
        """Return the current statistics."""
        return Gamma(self.mean, self.variance, self._count)

    @property
    def sample_count(self) -> int:
        """Return the number of observed values in the window."""
        return self._count

    @property
    def window(self) -> list[float]:
        """Return the window contents, oldest first."""
        return list(self._window)

    def _resync(self) -> None:
        """Recompute the running sums from the window contents."""
        observed = [value for value in self._window if not math.isnan(value)]
        self._count = len(observed)
        self._shift = math.fsum(observed) / self._count if observed else 0.0
        deviations = [value - self._shift for value in observed]
        self._sum = math.fsum(deviations)
        self._sum_sq = math.fsum(dev * dev for dev in deviations)
        self._since_resync = 0
        self._refresh()

    def _refresh(self) -> None:
        """Update mean and variance from the running sums."""
        if self._count < 2:
            _LOGGER.warning(
                "Dimension %s has %s observed values in its window, keeping previous statistics",
                self.dim,
                self._count,
            )
            return
        offset = self._sum / self._count
        self.mean = self._shift + offset
        variance = (self._sum_sq - self._sum * offset) / (self._count - 1)
        self.variance = max(variance, self.variance_floor)

    def accept(self, value: float) -> SequenceModel:
        """Move the window forward by one accepted value."""
        value = float(value)
        if len(self._window) == self.window_len:
            oldest = self._window[0]
            if not math.isnan(oldest):
                deviation = oldest - self._shift
                self._sum -= deviation
                self._sum_sq -= deviation * deviation
                self._count -= 1
        self._window.append(value)
        if not math.isnan(value):
            deviation = value - self._shift
            self._sum += deviation
            self._sum_sq += deviation * deviation
            self._count += 1

        self._since_resync += 1
        if self._since_resync >= MODEL_RESYNC_EVERY:
            self._resync()
        else:
            self._refresh()
        return self

    def as_dict(self) -> dict[str, Any]:
        """Return a JSON snapshot of the model."""
        return {
            "dim": self.dim,
            "window_len": self.window_len,
            "variance_floor": self.variance_floor,
            "mean": self.mean,
            "variance": self.variance,
            "sample_count": self._count,
            "window": [None if math.isnan(value) else value for value in self._window],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SequenceModel:
        """Restore a model from its JSON snapshot."""
        try:
            window = [math.nan if value is None else float(value) for value in data["window"]]
            return cls(
                dim=int(data["dim"]),
                window_len=int(data["window_len"]),
                variance_floor=float(data.get("variance_floor", DEFAULT_VARIANCE_FLOOR)),
                window=window,
            )
        except (KeyError, TypeError, ValueError) as err:
            raise RepairStructureError(f"Invalid model snapshot: {err}") from err

    def __repr__(self) -> str:
        return (
            f"SequenceModel(dim={self.dim}, mean={self.mean:.6g}, "
            f"variance={self.variance:.6g}, sample_count={self._count})"
        )


def fit(history: Sequence[float], config: ModelConfig, dim: int = 0) -> SequenceModel:
    """Fit a model on the last window_len values of a history."""
    tail = list(history)[-config.window_len :]
    return SequenceModel(dim, config.window_len, config.variance_floor, tail)


def fit_models(series: MultiSeries, rows: slice, config: ModelConfig) -> list[SequenceModel]:
    """Fit one model per dimension from a slice of the series rows."""
    history = series.values[rows]
    models = [fit(history[:, dim], config, dim) for dim in range(series.dim_count)]
    _LOGGER.info(
        "Fitted %s behavior models on %s rows", len(models), history.shape[0]
    )
    return models


def membership_probability(model: SequenceModel, value: float) -> float:
    """Return the two-sided Gaussian tail probability of a value; 1.0 for missing."""
    if math.isnan(value):
        return 1.0
    return float(erfc(abs(value - model.mean) / (_SQRT2 * math.sqrt(model.variance))))


def is_anomalous(model: SequenceModel, value: float, config: ModelConfig) -> bool:
    """Return true if the value falls below the model support threshold."""
    return membership_probability(model, value) < config.support_threshold


def membership_grid(models: Sequence[SequenceModel], values: np.ndarray) -> np.ndarray:
    """Return cell (n, m) = probability that values[m] conforms to models[n].

    Missing values get probability 1.0 under every model.
    """
    means = np.array([model.mean for model in models])
    scales = _SQRT2 * np.sqrt(np.array([model.variance for model in models]))
    deviation = np.abs(values[np.newaxis, :] - means[:, np.newaxis])
    grid = erfc(deviation / scales[:, np.newaxis])
    return np.where(np.isnan(grid), 1.0, grid)


def row_memberships(models: Sequence[SequenceModel], row: np.ndarray) -> np.ndarray:
    """Return the membership of each value in a tuple under its own dimension's model."""
    means = np.array([model.mean for model in models])
    scales = _SQRT2 * np.sqrt(np.array([model.variance for model in models]))
    probabilities = erfc(np.abs(row - means) / scales)
    return np.where(np.isnan(row), 1.0, probabilities)
