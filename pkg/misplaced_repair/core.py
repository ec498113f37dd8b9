"""Domain types and rotation algebra for misplaced subsequence repair."""
from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
import logging
from typing import Any

import numpy as np

_LOGGER = logging.getLogger(__name__)


class RepairStructureError(Exception):
    """Exception raised when a structural precondition is violated."""


@dataclass(frozen=True)
class DataPoint:
    """A single sensor reading at a position of the global time axis."""

    value: float
    time_index: int


@dataclass(frozen=True)
class TimeInterval:
    """Closed interval [start, end] of time indices."""

    start: int
    end: int

    def __post_init__(self) -> None:
        """Validate the bounds."""
        if self.start < 0 or self.end < self.start:
            raise RepairStructureError(
                f"Invalid interval [{self.start}, {self.end}]"
            )

    def __lt__(self, other: TimeInterval) -> bool:
        return (self.start, self.end) < (other.start, other.end)

    @property
    def length(self) -> int:
        """Return the number of time indices covered."""
        return self.end - self.start + 1

    def overlaps(self, other: TimeInterval) -> bool:
        """Return true if both intervals share at least one index."""
        return self.start <= other.end and other.start <= self.end

    def intersection_length(self, other: TimeInterval) -> int:
        """Return the number of shared indices."""
        return max(0, min(self.end, other.end) - max(self.start, other.start) + 1)

    def check_within(self, length: int) -> None:
        """Raise if the interval does not fit a time axis of the given length."""
        if self.end >= length:
            raise RepairStructureError(
                f"Interval [{self.start}, {self.end}] exceeds series length {length}"
            )

    def as_list(self) -> list[int]:
        """Return [start, end]."""
        return [self.start, self.end]


@dataclass(frozen=True)
class RotationPattern:
    """A cyclic reassignment of dimensions, kept in canonical form.

    The value recorded in ``cycle[i]`` belongs to ``cycle[i + 1]`` (cyclically).
    The canonical form starts with the smallest dimension index.
    """

    cycle: tuple[int, ...]

    def __post_init__(self) -> None:
        """Validate and canonicalize the cycle."""
        cycle = tuple(int(dim) for dim in self.cycle)
        if len(cycle) < 2:
            raise RepairStructureError(f"Rotation needs at least two dimensions: {cycle}")
        if len(set(cycle)) != len(cycle):
            raise RepairStructureError(f"Rotation repeats a dimension: {cycle}")
        if min(cycle) < 0:
            raise RepairStructureError(f"Negative dimension in rotation: {cycle}")
        pivot = cycle.index(min(cycle))
        object.__setattr__(self, "cycle", cycle[pivot:] + cycle[:pivot])

    def __lt__(self, other: RotationPattern) -> bool:
        return self.cycle < other.cycle

    def __str__(self) -> str:
        return "(" + ",".join(str(dim) for dim in self.cycle) + ")"

    @property
    def order(self) -> int:
        """Return the number of dimensions in the cycle."""
        return len(self.cycle)

    @property
    def dims(self) -> frozenset[int]:
        """Return the support of the rotation."""
        return frozenset(self.cycle)

    def inverse(self) -> RotationPattern:
        """Return the rotation that undoes this one."""
        return RotationPattern(tuple(reversed(self.cycle)))

    def as_mapping(self) -> dict[int, int]:
        """Return {source dimension: destination dimension}."""
        return {
            dim: self.cycle[(pos + 1) % self.order]
            for pos, dim in enumerate(self.cycle)
        }


def rotations_to_mapping(rotations: Iterable[RotationPattern]) -> dict[int, int]:
    """Merge disjoint rotations into a single mapping of the involved dimensions."""
    mapping: dict[int, int] = {}
    for rotation in rotations:
        if mapping.keys() & rotation.dims:
            raise RepairStructureError(f"Rotation {rotation} overlaps another rotation")
        mapping.update(rotation.as_mapping())
    return mapping


def rotations_disjoint(rotations: Iterable[RotationPattern]) -> bool:
    """Return true if no dimension occurs in two rotations."""
    seen: set[int] = set()
    for rotation in rotations:
        if seen & rotation.dims:
            return False
        seen |= rotation.dims
    return True


@dataclass(frozen=True)
class InconsistencyInstance:
    """Disjoint rotations sharing one inconsistent interval."""

    rotations: tuple[RotationPattern, ...]
    interval: TimeInterval

    def __post_init__(self) -> None:
        """Sort the rotations and check they are disjoint."""
        rotations = tuple(sorted(set(self.rotations)))
        if not rotations:
            raise RepairStructureError("Inconsistency instance needs a rotation")
        if not rotations_disjoint(rotations):
            raise RepairStructureError(
                f"Rotations of an instance must be disjoint: {[str(r) for r in rotations]}"
            )
        object.__setattr__(self, "rotations", rotations)

    @property
    def size(self) -> int:
        """Return the number of involved dimensions."""
        return sum(rotation.order for rotation in self.rotations)

    @property
    def rotation_set(self) -> frozenset[RotationPattern]:
        """Return the rotations as a set."""
        return frozenset(self.rotations)


@dataclass(frozen=True)
class ReviewEntry:
    """A tuple handed over for manual inspection instead of being repaired."""

    time_index: int
    dims: tuple[int, ...]
    mapping: dict[int, int]

    def as_dict(self) -> dict[str, Any]:
        """Return a JSON-ready representation."""
        return {
            "time_index": self.time_index,
            "dims": list(self.dims),
            "mapping": {str(src): dst for src, dst in sorted(self.mapping.items())},
        }


@dataclass
class RepairReport:
    """Final repair schemas for one series.

    ``applied`` lists every rotation with the exact interval it was applied over;
    an instance may span several of them.
    """

    instances: list[InconsistencyInstance]
    length: int
    review_queue: list[ReviewEntry] = field(default_factory=list)
    config_echo: dict[str, Any] = field(default_factory=dict)
    applied: list[tuple[TimeInterval, RotationPattern]] = field(default_factory=list)

    def __post_init__(self) -> None:
        """Sort instances by time and check their intervals are disjoint."""
        self.instances = sorted(self.instances, key=lambda inst: inst.interval)
        if not self.applied:
            self.applied = [
                (instance.interval, rotation)
                for instance in self.instances
                for rotation in instance.rotations
            ]
        for previous, current in zip(self.instances, self.instances[1:]):
            if previous.interval.overlaps(current.interval):
                raise RepairStructureError(
                    f"Report intervals overlap: {previous.interval} and {current.interval}"
                )
        for instance in self.instances:
            instance.interval.check_within(self.length)


@dataclass(frozen=True)
class MultiSeries:
    """An N x M grid of readings, one column per sensor dimension.

    Missing readings are NaN. The value grid is read-only; repairs return a new series.
    """

    values: np.ndarray
    timestamps: np.ndarray
    dim_names: tuple[str, ...] = ()
    time_labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        """Validate shape and ordering, then freeze the grid."""
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] == 0 or values.shape[1] == 0:
            raise RepairStructureError(
                f"Series values must be a non-empty N x M grid, got shape {values.shape}"
            )
        length, dim_count = values.shape

        timestamps = np.asarray(self.timestamps)
        if timestamps.shape != (length,):
            raise RepairStructureError(
                f"Expected {length} timestamps, got {timestamps.shape[0] if timestamps.ndim else 0}"
            )
        if length > 1 and not np.all(np.diff(timestamps) > 0):
            raise RepairStructureError("Timestamps must be strictly increasing")

        dim_names = tuple(self.dim_names) or tuple(f"S{dim}" for dim in range(dim_count))
        if len(dim_names) != dim_count:
            raise RepairStructureError(
                f"Expected {dim_count} dimension names, got {len(dim_names)}"
            )
        time_labels = tuple(self.time_labels)
        if time_labels and len(time_labels) != length:
            raise RepairStructureError(
                f"Expected {length} time labels, got {len(time_labels)}"
            )

        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "timestamps", timestamps)
        object.__setattr__(self, "dim_names", dim_names)
        object.__setattr__(self, "time_labels", time_labels)

    @classmethod
    def from_values(cls, values: Any, **kwargs: Any) -> MultiSeries:
        """Build a series indexed 0..N-1 when no timestamps are at hand."""
        grid = np.asarray(values, dtype=float)
        return cls(values=grid, timestamps=np.arange(grid.shape[0]), **kwargs)

    @property
    def length(self) -> int:
        """Return N."""
        return self.values.shape[0]

    @property
    def dim_count(self) -> int:
        """Return M."""
        return self.values.shape[1]

    def row(self, time_index: int) -> np.ndarray:
        """Return the sequence tuple at a time index."""
        return self.values[time_index]

    def point(self, time_index: int, dim: int) -> DataPoint:
        """Return one reading."""
        return DataPoint(value=float(self.values[time_index, dim]), time_index=time_index)

    def label(self, time_index: int) -> str:
        """Return the timestamp text for a time index."""
        if self.time_labels:
            return self.time_labels[time_index]
        return str(self.timestamps[time_index])

    def with_values(self, values: np.ndarray) -> MultiSeries:
        """Return a series on the same time axis with another value grid."""
        return MultiSeries(
            values=values,
            timestamps=self.timestamps,
            dim_names=self.dim_names,
            time_labels=self.time_labels,
        )

    def head(self, length: int) -> MultiSeries:
        """Return the first rows of the series."""
        return MultiSeries(
            values=self.values[:length],
            timestamps=self.timestamps[:length],
            dim_names=self.dim_names,
            time_labels=self.time_labels[:length],
        )


def decompose_permutation(
    mapping: Mapping[int, int] | Sequence[int],
) -> tuple[RotationPattern, ...]:
    """Split a bijection into its disjoint rotations of order two or more.

    A sequence is read as ``mapping[i]`` = destination of source ``i``.
    Fixed points are dropped. The result is sorted by canonical cycle.
    """
    if not isinstance(mapping, Mapping):
        mapping = dict(enumerate(mapping))
    mapping = {int(src): int(dst) for src, dst in mapping.items()}
    if set(mapping) != set(mapping.values()):
        raise RepairStructureError(f"Mapping is not a bijection: {mapping}")

    visited: set[int] = set()
    rotations = []
    for start in sorted(mapping):
        if start in visited:
            continue
        cycle = []
        current = start
        while current not in visited:
            visited.add(current)
            cycle.append(current)
            current = mapping[current]
        if len(cycle) > 1:
            rotations.append(RotationPattern(tuple(cycle)))
    return tuple(sorted(rotations))


def rotate_rows(grid: np.ndarray, rotation: RotationPattern, interval: TimeInterval) -> None:
    """Move cells of ``grid`` in place: column cycle[i] goes to cycle[i + 1] within the interval.

    Works for any 2-D array, including object arrays of raw CSV text.
    """
    if max(rotation.cycle) >= grid.shape[1]:
        raise RepairStructureError(
            f"Rotation {rotation} exceeds dimension count {grid.shape[1]}"
        )
    interval.check_within(grid.shape[0])
    source = list(rotation.cycle)
    destination = source[1:] + source[:1]
    rows = slice(interval.start, interval.end + 1)
    grid[rows, destination] = grid[rows, source]


def apply_rotation(
    series: MultiSeries, rotation: RotationPattern, interval: TimeInterval
) -> MultiSeries:
    """Return a copy of the series with one rotation applied over an interval."""
    values = series.values.copy()
    rotate_rows(values, rotation, interval)
    return series.with_values(values)


def interval_jaccard(first: TimeInterval, second: TimeInterval) -> float:
    """Return |a ∩ b| / |a ∪ b| counted in time indices."""
    shared = first.intersection_length(second)
    union = first.length + second.length - shared
    return shared / union
