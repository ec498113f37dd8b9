"""Pytest fixtures for misplaced subsequence repair tests."""
from __future__ import annotations

from collections.abc import Callable
from pathlib import Path

import numpy as np
import pytest

from misplaced_repair.config import RunConfig
from misplaced_repair.core import MultiSeries

# Column means are this far apart, in standard deviations
SEPARATION = 10.0


def synthetic_values(length: int, dims: int, seed: int = 0) -> np.ndarray:
    """Return Gaussian columns with unit variance and well-separated means."""
    rng = np.random.default_rng(seed)
    means = SEPARATION * np.arange(dims)
    return means + rng.standard_normal((length, dims))


@pytest.fixture
def make_series() -> Callable[..., MultiSeries]:
    """Return a factory for well-separated synthetic series."""

    def factory(length: int = 2000, dims: int = 4, seed: int = 0) -> MultiSeries:
        return MultiSeries.from_values(synthetic_values(length, dims, seed))

    return factory


@pytest.fixture
def run_config() -> RunConfig:
    """Return the default run configuration."""
    return RunConfig()


@pytest.fixture
def write_csv(tmp_path: Path) -> Callable[..., Path]:
    """Return a factory writing a series as a CSV file with epoch timestamps."""

    def factory(series: MultiSeries, name: str = "input.csv") -> Path:
        path = tmp_path / name
        lines = ["timestamp," + ",".join(series.dim_names)]
        for index in range(series.length):
            cells = ["" if np.isnan(value) else repr(float(value)) for value in series.row(index)]
            lines.append(f"{1_600_000_000 + 60 * index}," + ",".join(cells))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return factory
