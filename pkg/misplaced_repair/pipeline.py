"""Candidate repair schemas: scan tuples in time order, match and decompose."""
from __future__ import annotations

from collections.abc import Sequence
import copy
from dataclasses import dataclass, field
import logging
import math
from typing import Any

import numpy as np

from .behavior import ModelConfig, SequenceModel, fit_models, row_memberships
from .const import (
    BLOCK_LAMBDA_RANGE,
    DEFAULT_SIZE_THRESHOLD,
    MATCHER_EXACT,
    MATCHERS,
    MIN_SIZE_THRESHOLD,
)
from .core import (
    MultiSeries,
    RepairStructureError,
    ReviewEntry,
    RotationPattern,
    decompose_permutation,
    rotations_to_mapping,
)
from .matching import WeightMatrix, match, matching_to_mapping

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    """Settings of the candidate schema scan."""

    model_config: ModelConfig = field(default_factory=ModelConfig)
    size_threshold: int = DEFAULT_SIZE_THRESHOLD
    matcher: str = MATCHER_EXACT

    def __post_init__(self) -> None:
        """Validate the size threshold and matcher."""
        if self.size_threshold < MIN_SIZE_THRESHOLD:
            raise RepairStructureError(
                f"size_threshold must be at least {MIN_SIZE_THRESHOLD}, got {self.size_threshold}"
            )
        if self.matcher not in MATCHERS:
            raise RepairStructureError(f"Unknown matcher: {self.matcher}")


@dataclass(frozen=True)
class CandidateSchema:
    """Rotations proposed for one tuple.

    Rotations of an oversized schema are advisory: the tuple goes to review unrepaired.
    """

    time_index: int
    rotations: tuple[RotationPattern, ...] = ()
    dims: tuple[int, ...] = ()
    oversized: bool = False

    @property
    def size(self) -> int:
        """Return the number of dimensions involved in the rotations."""
        return sum(rotation.order for rotation in self.rotations)

    @property
    def active_rotations(self) -> tuple[RotationPattern, ...]:
        """Return the rotations that take part in repair determination."""
        return () if self.oversized else self.rotations

    def review_entry(self) -> ReviewEntry:
        """Return the review record of an oversized schema."""
        return ReviewEntry(self.time_index, self.dims, rotations_to_mapping(self.rotations))

    def as_dict(self) -> dict[str, Any]:
        """Return a JSON-ready representation."""
        return {
            "time_index": self.time_index,
            "dims": list(self.dims),
            "rotations": [list(rotation.cycle) for rotation in self.rotations],
            "oversized": self.oversized,
        }


@dataclass
class PipelineResult:
    """Output of a scan over the series."""

    schemas: list[CandidateSchema]
    candidate: MultiSeries
    review_queue: list[ReviewEntry]
    models: list[SequenceModel]


def detect_anomalous_set(
    series: MultiSeries,
    time_index: int,
    models: Sequence[SequenceModel],
    config: PipelineConfig,
) -> list[int]:
    """Return the dimensions whose value at time_index is anomalous under its own model."""
    probabilities = row_memberships(models, series.row(time_index))
    threshold = config.model_config.support_threshold
    return [int(dim) for dim in np.flatnonzero(probabilities < threshold)]


def _scan_row(
    time_index: int,
    row: np.ndarray,
    models: Sequence[SequenceModel],
    config: PipelineConfig,
    update: bool,
) -> tuple[CandidateSchema, np.ndarray]:
    """Detect, match and decompose one tuple, advancing the models when update is set."""
    threshold = config.model_config.support_threshold
    anomalous = [int(dim) for dim in np.flatnonzero(row_memberships(models, row) < threshold)]
    candidate = row.copy()
    rotations: tuple[RotationPattern, ...] = ()
    oversized = False

    if len(anomalous) >= 2:
        matrix = WeightMatrix.from_models(models, row, anomalous)
        mapping = matching_to_mapping(match(matrix, config.matcher))
        rotations = decompose_permutation(mapping)
        involved = sum(rotation.order for rotation in rotations)
        _LOGGER.debug(
            "Tuple %s: anomalous %s, mapping %s, rotations %s",
            time_index,
            anomalous,
            mapping,
            [str(rotation) for rotation in rotations],
        )
        if involved > config.size_threshold:
            oversized = True
            _LOGGER.warning(
                "Tuple %s involves %s dimensions (threshold %s), sent to review",
                time_index,
                involved,
                config.size_threshold,
            )
        else:
            for source, destination in mapping.items():
                candidate[destination] = row[source]

    if update:
        normal = row_memberships(models, candidate) >= threshold
        means = np.array([model.mean for model in models])
        for model, value in zip(models, np.where(normal, candidate, means)):
            model.accept(value)

    schema = CandidateSchema(time_index, rotations, tuple(anomalous), oversized)
    return schema, candidate


def process_tuple(
    series: MultiSeries,
    time_index: int,
    models: Sequence[SequenceModel],
    config: PipelineConfig,
) -> tuple[CandidateSchema, Sequence[SequenceModel], np.ndarray]:
    """Compute the candidate schema of one tuple and advance the models.

    Every model accepts the candidate-repaired value of its dimension when that
    value conforms to it, and its own mean otherwise.
    """
    schema, candidate = _scan_row(
        time_index, np.array(series.row(time_index)), models, config, update=True
    )
    return schema, models, candidate


def _prepare_models(
    series: MultiSeries,
    config: PipelineConfig,
    initial_models: Sequence[SequenceModel] | None,
) -> tuple[list[SequenceModel], int]:
    """Return working models and the first row to scan."""
    window_len = config.model_config.window_len
    if initial_models is not None:
        if len(initial_models) != series.dim_count:
            raise RepairStructureError(
                f"Got {len(initial_models)} models for {series.dim_count} dimensions"
            )
        return copy.deepcopy(list(initial_models)), 0
    if series.length < window_len:
        raise RepairStructureError(
            f"Series has {series.length} rows, shorter than the window of {window_len}"
        )
    return fit_models(series, slice(0, window_len), config.model_config), window_len


def run_pipeline(
    series: MultiSeries,
    config: PipelineConfig,
    initial_models: Sequence[SequenceModel] | None = None,
) -> PipelineResult:
    """Scan every tuple in time order and collect candidate schemas.

    Without initial models the first window_len rows fit the models and are not scanned.
    """
    models, start = _prepare_models(series, config, initial_models)
    candidate = series.values.copy()
    schemas = [CandidateSchema(time_index) for time_index in range(start)]
    review_queue = []

    for time_index in range(start, series.length):
        schema, candidate[time_index] = _scan_row(
            time_index, np.array(series.values[time_index]), models, config, update=True
        )
        schemas.append(schema)
        if schema.oversized:
            review_queue.append(schema.review_entry())

    _LOGGER.info(
        "Scanned %s tuples: %s with rotations, %s sent to review",
        series.length - start,
        sum(1 for schema in schemas if schema.active_rotations),
        len(review_queue),
    )
    return PipelineResult(schemas, series.with_values(candidate), review_queue, models)


def block_length(length: int, block_lambda: float) -> int:
    """Return the chunk length ceil(lambda * sqrt(N))."""
    low, high = BLOCK_LAMBDA_RANGE
    if not low <= block_lambda <= high:
        raise RepairStructureError(
            f"block_lambda must lie in [{low}, {high}], got {block_lambda}"
        )
    return math.ceil(block_lambda * math.sqrt(length))


def _chunks(length: int, chunk_len: int) -> list[tuple[int, int]]:
    """Return half-open chunk bounds; a trailing chunk of one row joins its predecessor."""
    bounds = [(start, min(start + chunk_len, length)) for start in range(0, length, chunk_len)]
    if len(bounds) > 1 and bounds[-1][1] - bounds[-1][0] < 2:
        bounds[-2:] = [(bounds[-2][0], length)]
    return bounds


def _chunk_models(
    series: MultiSeries,
    start: int,
    end: int,
    variance_floor: float,
    previous: Sequence[SequenceModel],
) -> list[SequenceModel]:
    """Fit one static model per dimension on the rows [start, end).

    A dimension with fewer than 2 observed values in the chunk keeps the model of
    the previous chunk, or a model of its whole column in the first chunk.
    """
    chunk = series.values[start:end]
    observed = np.count_nonzero(~np.isnan(chunk), axis=0)
    models = []
    for dim in range(series.dim_count):
        if observed[dim] >= 2:
            models.append(SequenceModel(dim, end - start, variance_floor, chunk[:, dim]))
            continue
        _LOGGER.warning(
            "Dimension %s has %s observed values in rows [%s, %s), reusing an earlier model",
            dim,
            observed[dim],
            start,
            end,
        )
        if previous:
            models.append(previous[dim])
        else:
            models.append(
                SequenceModel(dim, series.length, variance_floor, series.values[:, dim])
            )
    return models


def run_block_pipeline(series: MultiSeries, config: PipelineConfig, chunk_len: int) -> PipelineResult:
    """Scan chunk by chunk with models fitted on the whole chunk and never updated."""
    if chunk_len < 2 or series.length < 2:
        raise RepairStructureError(
            f"Block scan needs chunks and series of at least 2 rows, got {chunk_len} and {series.length}"
        )
    floor = config.model_config.variance_floor
    candidate = series.values.copy()
    schemas = []
    review_queue = []
    models: list[SequenceModel] = []

    for start, end in _chunks(series.length, chunk_len):
        models = _chunk_models(series, start, end, floor, models)
        for time_index in range(start, end):
            schema, candidate[time_index] = _scan_row(
                time_index, np.array(series.values[time_index]), models, config, update=False
            )
            schemas.append(schema)
            if schema.oversized:
                review_queue.append(schema.review_entry())

    _LOGGER.info(
        "Block scan with chunks of %s rows: %s tuples with rotations",
        chunk_len,
        sum(1 for schema in schemas if schema.active_rotations),
    )
    return PipelineResult(schemas, series.with_values(candidate), review_queue, models)
