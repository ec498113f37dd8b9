"""Tests for the sequence behavior models."""
from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate

from misplaced_repair.behavior import (
    ModelConfig,
    SequenceModel,
    fit,
    fit_models,
    is_anomalous,
    membership_grid,
    membership_probability,
)
from misplaced_repair.core import MultiSeries, RepairStructureError


def gaussian_tail(deviations: float) -> float:
    """Return the two-sided tail mass beyond a number of standard deviations."""
    density = lambda x: math.exp(-x * x / 2) / math.sqrt(2 * math.pi)  # noqa: E731
    inner, _error = integrate.quad(density, -deviations, deviations)
    return 1.0 - inner


def test_fit_constant_history_clamps_variance() -> None:
    """Test a constant history gets the variance floor."""
    model = fit([5, 5, 5, 5], ModelConfig(window_len=4, variance_floor=1e-6))
    assert model.mean == 5
    assert model.variance == 1e-6


def test_fit_uses_sample_variance() -> None:
    """Test the variance has n - 1 in the denominator."""
    model = fit([0, 2, 0, 2], ModelConfig(window_len=4))
    assert model.mean == pytest.approx(1.0)
    assert model.variance == pytest.approx(4 / 3)


def test_fit_keeps_last_window() -> None:
    """Test only the last window_len values are used."""
    model = fit([100, 100, 1, 2, 3], ModelConfig(window_len=3))
    assert model.window == [1.0, 2.0, 3.0]
    assert model.mean == pytest.approx(2.0)


def test_fit_matches_generator() -> None:
    """Test a large sample recovers the generating parameters."""
    draws = np.random.default_rng(7).normal(3.0, 2.0, size=1000)
    model = fit(draws, ModelConfig(window_len=1000))
    assert abs(model.mean - 3.0) < 3 * 2.0 / math.sqrt(1000)
    assert abs(model.variance - 4.0) < 3 * 4.0 * math.sqrt(2 / 999)


def test_fit_requires_two_values() -> None:
    """Test a history shorter than two raises."""
    with pytest.raises(RepairStructureError):
        fit([1.0], ModelConfig())
    with pytest.raises(RepairStructureError):
        fit([1.0, math.nan], ModelConfig())


def test_membership_at_mean_is_one() -> None:
    """Test zero deviation has probability one."""
    model = fit([0, 2, 0, 2], ModelConfig(window_len=4))
    assert membership_probability(model, model.mean) == 1.0
    assert not is_anomalous(model, model.mean, ModelConfig(support_threshold=0.99))


def test_membership_matches_gaussian_tail() -> None:
    """Test membership against numeric integration of the density."""
    model = fit([0, 2, 0, 2], ModelConfig(window_len=4))
    sigma = math.sqrt(model.variance)
    near = membership_probability(model, model.mean + 1.96 * sigma)
    assert near == pytest.approx(gaussian_tail(1.96), abs=1e-6)
    assert near == pytest.approx(0.05, abs=0.002)
    assert membership_probability(model, model.mean - 10 * sigma) < 1e-20


def test_membership_is_symmetric_and_decreasing() -> None:
    """Test membership falls off equally on both sides of the mean."""
    model = fit([0, 2, 0, 2], ModelConfig(window_len=4))
    offsets = np.linspace(0.1, 5.0, 20)
    above = [membership_probability(model, model.mean + offset) for offset in offsets]
    below = [membership_probability(model, model.mean - offset) for offset in offsets]
    assert above == pytest.approx(below)
    assert all(later < earlier for earlier, later in zip(above, above[1:]))


def test_is_anomalous_far_value() -> None:
    """Test a value 100 standard deviations out is anomalous."""
    model = fit([0, 2, 0, 2], ModelConfig(window_len=4))
    assert is_anomalous(model, model.mean + 100 * math.sqrt(model.variance), ModelConfig())


def test_is_anomalous_is_strict() -> None:
    """Test membership exactly at the threshold is not anomalous."""
    model = fit([0, 2, 0, 2], ModelConfig(window_len=4))
    value = model.mean + 1.5
    config = ModelConfig(support_threshold=membership_probability(model, value))
    assert not is_anomalous(model, value, config)


def test_missing_values_are_never_anomalous() -> None:
    """Test NaN has full membership and is skipped in statistics."""
    model = SequenceModel(0, 5, 1e-9, [1.0, math.nan, 3.0])
    assert model.sample_count == 2
    assert model.mean == pytest.approx(2.0)
    assert membership_probability(model, math.nan) == 1.0


def test_accept_slides_window() -> None:
    """Test accepting evicts the oldest value."""
    model = fit([1, 2, 3], ModelConfig(window_len=3))
    model.accept(4)
    assert model.window == [2.0, 3.0, 4.0]
    assert model.mean == pytest.approx(3.0)


def test_accept_mean_keeps_constant_window() -> None:
    """Test accepting the mean of a constant window changes nothing."""
    model = fit([7, 7, 7, 7], ModelConfig(window_len=4))
    model.accept(7)
    assert model.mean == 7
    assert model.variance == ModelConfig().variance_floor


def test_running_statistics_match_batch_refit() -> None:
    """Test ten thousand accepts agree with a refit on the same window."""
    rng = np.random.default_rng(3)
    config = ModelConfig(window_len=50)
    values = rng.normal(1e4, 3.0, size=10_050)
    model = fit(values[:50], config)
    for value in values[50:]:
        model.accept(value)
    batch = fit(values[-50:], config)
    assert abs(model.mean - batch.mean) < 1e-9
    assert abs(model.variance - batch.variance) < 1e-9


def test_snapshot_round_trip() -> None:
    """Test a model restored from its snapshot has the same statistics."""
    model = SequenceModel(2, 4, 1e-9, [1.0, math.nan, 2.0, 4.0])
    restored = SequenceModel.from_dict(model.as_dict())
    assert restored.dim == 2
    assert restored.gamma == model.gamma
    assert model.as_dict()["window"][1] is None


def test_snapshot_rejects_missing_keys() -> None:
    """Test a malformed snapshot raises."""
    with pytest.raises(RepairStructureError, match="snapshot"):
        SequenceModel.from_dict({"dim": 0})


def test_fit_models_one_per_dimension() -> None:
    """Test one model is fitted per column."""
    series = MultiSeries.from_values([[0.0, 10.0], [2.0, 12.0], [0.0, 10.0], [2.0, 12.0]])
    models = fit_models(series, slice(0, 4), ModelConfig(window_len=4))
    assert [model.dim for model in models] == [0, 1]
    assert [model.mean for model in models] == pytest.approx([1.0, 11.0])


def test_membership_grid_cells() -> None:
    """Test cell (n, m) scores value m under model n."""
    config = ModelConfig(window_len=4)
    models = [fit([0, 2, 0, 2], config, 0), fit([10, 12, 10, 12], config, 1)]
    grid = membership_grid(models, np.array([11.0, 1.0]))
    assert grid[0, 1] == pytest.approx(1.0)
    assert grid[1, 0] == pytest.approx(1.0)
    assert grid[0, 0] < 1e-10
    assert grid[1, 1] < 1e-10


def test_model_config_validation() -> None:
    """Test out-of-range settings raise."""
    with pytest.raises(RepairStructureError):
        ModelConfig(support_threshold=1.0)
    with pytest.raises(RepairStructureError):
        ModelConfig(variance_floor=0)
    with pytest.raises(RepairStructureError):
        ModelConfig(window_len=1)
