"""Error injection with ground truth, scoring and parameter sweeps."""
from __future__ import annotations

import asyncio
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, replace
import logging
import time
from typing import Any

import numpy as np

from .config import RunConfig
from .const import (
    DEFAULT_INSTANCE_COUNT,
    DEFAULT_JACCARD_MIN,
    DEFAULT_LENGTH_MAX,
    DEFAULT_LENGTH_MIN,
    DEFAULT_MAX_INCONSISTENT_DIMS,
    DEFAULT_MAX_ORDER,
    DEFAULT_SEED,
    DEFAULT_WINDOW_LEN,
)
from .coordinator import RepairCoordinator
from .core import (
    InconsistencyInstance,
    MultiSeries,
    RepairReport,
    RepairStructureError,
    RotationPattern,
    TimeInterval,
    interval_jaccard,
    rotate_rows,
)

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class InjectionSpec:
    """Controlled variables of an error injection run."""

    instance_count: int = DEFAULT_INSTANCE_COUNT
    length_min: int = DEFAULT_LENGTH_MIN
    length_max: int = DEFAULT_LENGTH_MAX
    max_order: int = DEFAULT_MAX_ORDER
    max_inconsistent_dims: int = DEFAULT_MAX_INCONSISTENT_DIMS
    seed: int = DEFAULT_SEED
    clean_prefix: int | None = None
    min_gap: int | None = None

    def __post_init__(self) -> None:
        """Validate the ranges."""
        if self.instance_count < 0:
            raise RepairStructureError(f"instance_count must be >= 0, got {self.instance_count}")
        if not 1 <= self.length_min <= self.length_max:
            raise RepairStructureError(
                f"Invalid interval length range [{self.length_min}, {self.length_max}]"
            )
        if self.max_order < 2 or self.max_inconsistent_dims < 2:
            raise RepairStructureError("max_order and max_inconsistent_dims must be at least 2")
        if any(value is not None and value < 0 for value in (self.clean_prefix, self.min_gap)):
            raise RepairStructureError("clean_prefix and min_gap must be non-negative")

    @property
    def gap(self) -> int:
        """Return the minimum number of clean rows between two instances."""
        return 2 * self.length_max if self.min_gap is None else self.min_gap

    @property
    def prefix(self) -> int:
        """Return the clean rows before the first instance, the default window when unset."""
        return DEFAULT_WINDOW_LEN if self.clean_prefix is None else self.clean_prefix


@dataclass
class GroundTruth:
    """Injected instances, recorded as the rotations that repair them."""

    instances: list[InconsistencyInstance]
    length: int

    def __post_init__(self) -> None:
        """Check the intervals are pairwise disjoint and within the axis."""
        RepairReport(self.instances, self.length)
        self.instances = sorted(self.instances, key=lambda instance: instance.interval)


def _draw_orders(rng: np.random.Generator, budget: int, max_order: int) -> list[int]:
    """Split a dimension budget into rotation orders between 2 and max_order."""
    orders = []
    remaining = budget
    while remaining >= 2:
        choices = [
            order
            for order in range(2, min(max_order, remaining) + 1)
            if remaining - order != 1
        ]
        if not choices:
            # an odd budget made of pairs leaves one dimension out
            choices = [min(max_order, remaining)]
        order = int(rng.choice(choices))
        orders.append(order)
        remaining -= order
    return orders


def inject(series: MultiSeries, spec: InjectionSpec) -> tuple[MultiSeries, GroundTruth]:
    """Corrupt a clean series with misplaced subsequences.

    Each instance applies the inverse of its recorded rotations, so applying the
    recorded rotations restores the clean series.
    """
    if spec.instance_count == 0:
        return series, GroundTruth([], series.length)
    if series.dim_count < 2:
        raise RepairStructureError("Injection needs at least two dimensions")

    rng = np.random.default_rng(spec.seed)
    lengths = rng.integers(spec.length_min, spec.length_max + 1, size=spec.instance_count)
    needed = spec.prefix + int(lengths.sum()) + spec.gap * (spec.instance_count - 1)
    slack = series.length - needed
    if slack < 0:
        raise RepairStructureError(
            f"Cannot place {spec.instance_count} instances in {series.length} rows "
            f"(needs at least {needed})"
        )
    extras = rng.multinomial(slack, [1 / (spec.instance_count + 1)] * (spec.instance_count + 1))

    values = series.values.copy()
    instances = []
    position = spec.prefix + int(extras[0])
    max_dims = min(spec.max_inconsistent_dims, series.dim_count)
    for number, length in enumerate(lengths):
        interval = TimeInterval(position, position + int(length) - 1)
        budget = int(rng.integers(2, max_dims + 1))
        dims = rng.permutation(series.dim_count).tolist()
        rotations = []
        for order in _draw_orders(rng, budget, spec.max_order):
            rotations.append(RotationPattern(tuple(dims[:order])))
            dims = dims[order:]
        for rotation in rotations:
            rotate_rows(values, rotation.inverse(), interval)
        instances.append(InconsistencyInstance(tuple(rotations), interval))
        position = interval.end + 1 + spec.gap + int(extras[number + 1])

    _LOGGER.info("Injected %s instances into %s rows", len(instances), series.length)
    return series.with_values(values), GroundTruth(instances, series.length)


def restore(corrupted: MultiSeries, truth: GroundTruth) -> MultiSeries:
    """Apply the recorded repairs to a corrupted series."""
    values = corrupted.values.copy()
    for instance in truth.instances:
        for rotation in instance.rotations:
            rotate_rows(values, rotation, instance.interval)
    return corrupted.with_values(values)


def truth_as_report(truth: GroundTruth) -> RepairReport:
    """Return the ground truth in report form."""
    return RepairReport(list(truth.instances), truth.length)


def _ratio(numerator: int, denominator: int) -> float:
    if denominator == 0:
        return 1.0 if numerator == 0 else 0.0
    return numerator / denominator


@dataclass(frozen=True)
class Scores:
    """Detection and repair precision and recall with their raw counts.

    A ratio with a zero denominator is 1.0 when its numerator is zero too, and is
    listed in ``undefined``.
    """

    detections: int
    correct_detections: int
    true_intervals: int
    correct_repairs: int
    undefined: tuple[str, ...] = field(default=())

    @classmethod
    def from_counts(
        cls, detections: int, correct_detections: int, true_intervals: int, correct_repairs: int
    ) -> Scores:
        """Build scores and flag the metrics with a zero denominator."""
        denominators = {
            "p_d": detections,
            "r_d": true_intervals,
            "p_r": correct_detections,
            "r_r": detections,
        }
        undefined = tuple(name for name, value in denominators.items() if value == 0)
        return cls(detections, correct_detections, true_intervals, correct_repairs, undefined)

    @property
    def p_d(self) -> float:
        """Return the detection precision."""
        return _ratio(self.correct_detections, self.detections)

    @property
    def r_d(self) -> float:
        """Return the detection recall."""
        return _ratio(self.correct_detections, self.true_intervals)

    @property
    def p_r(self) -> float:
        """Return the repair precision."""
        return _ratio(self.correct_repairs, self.correct_detections)

    @property
    def r_r(self) -> float:
        """Return the repair recall."""
        return _ratio(self.correct_repairs, self.detections)

    def as_row(self) -> dict[str, Any]:
        """Return a flat row for CSV output."""
        return {
            "p_d": self.p_d,
            "r_d": self.r_d,
            "p_r": self.p_r,
            "r_r": self.r_r,
            "detections": self.detections,
            "correct_detections": self.correct_detections,
            "true_intervals": self.true_intervals,
            "correct_repairs": self.correct_repairs,
            "undefined": ";".join(self.undefined),
        }

    def as_dict(self) -> dict[str, Any]:
        """Return a JSON-ready representation."""
        return {**self.as_row(), "undefined": list(self.undefined)}


def score(
    report: RepairReport, truth: GroundTruth, jaccard_min: float = DEFAULT_JACCARD_MIN
) -> Scores:
    """Match detections to true instances one-to-one by descending Jaccard and count."""
    if report.length != truth.length:
        raise RepairStructureError(
            f"Report covers {report.length} rows but the ground truth covers {truth.length}"
        )
    detected = sorted(report.instances, key=lambda instance: instance.interval)
    expected = truth.instances
    pairs = sorted(
        (-interval_jaccard(found.interval, true.interval), found_index, true_index)
        for found_index, found in enumerate(detected)
        for true_index, true in enumerate(expected)
        if found.interval.overlaps(true.interval)
    )
    used_found: set[int] = set()
    used_true: set[int] = set()
    correct_repairs = 0
    for negative_jaccard, found_index, true_index in pairs:
        if -negative_jaccard < jaccard_min:
            break
        if found_index in used_found or true_index in used_true:
            continue
        used_found.add(found_index)
        used_true.add(true_index)
        if detected[found_index].rotation_set == expected[true_index].rotation_set:
            correct_repairs += 1

    return Scores.from_counts(len(detected), len(used_found), len(expected), correct_repairs)


def run_variant(series: MultiSeries, config: RunConfig, variant: str) -> RepairReport:
    """Repair a series with one of the variants and return its report."""
    return RepairCoordinator(config).run(series, variant).report


@dataclass(frozen=True)
class SweepCell:
    """One point of a sweep grid."""

    length: int
    inconsistent_dims: int
    variant: str
    block_lambda: float

    def as_dict(self) -> dict[str, Any]:
        """Return the grid coordinates."""
        return asdict(self)


def evaluate_cell(
    clean: MultiSeries, cell: SweepCell, config: RunConfig, injection: InjectionSpec
) -> dict[str, Any]:
    """Inject, repair and score one sweep cell."""
    if cell.length > clean.length:
        raise RepairStructureError(
            f"Sweep length {cell.length} exceeds the {clean.length} input rows"
        )
    spec = replace(
        injection,
        max_inconsistent_dims=cell.inconsistent_dims,
        seed=config.seed,
        clean_prefix=(
            config.window_len if injection.clean_prefix is None else injection.clean_prefix
        ),
    )
    corrupted, truth = inject(clean.head(cell.length), spec)
    cell_config = replace(config, block_lambda=cell.block_lambda)
    started = time.perf_counter()
    report = run_variant(corrupted, cell_config, cell.variant)
    seconds = time.perf_counter() - started
    scores = score(report, truth, config.jaccard_min)
    return {**cell.as_dict(), **scores.as_row(), "seconds": seconds}


async def async_run_sweep(
    clean: MultiSeries,
    cells: Sequence[SweepCell],
    config: RunConfig,
    injection: InjectionSpec,
) -> list[dict[str, Any]]:
    """Evaluate sweep cells in worker threads, at most max_workers at a time."""
    semaphore = asyncio.Semaphore(config.max_workers)

    async def run_cell(cell: SweepCell) -> dict[str, Any]:
        async with semaphore:
            _LOGGER.debug("Running sweep cell %s", cell)
            return await asyncio.to_thread(evaluate_cell, clean, cell, config, injection)

    rows = await asyncio.gather(*(run_cell(cell) for cell in cells))
    _LOGGER.info("Evaluated %s sweep cells", len(rows))
    return list(rows)
