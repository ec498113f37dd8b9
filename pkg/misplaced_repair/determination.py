"""Determine final repairs from candidate schemas.

Candidate rotations are grouped into repair units, largest first. For each unit a
boolean sequence over the time axis is built, short noisy blocks are merged into
their neighbors, and the remaining long 1-blocks are repaired on the original series.
"""
from __future__ import annotations

from collections import Counter, defaultdict
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
import logging

import numpy as np

from .const import (
    DEFAULT_LEN1,
    DEFAULT_LEN2,
    DEFAULT_MERGE_THRESHOLD,
    DEFAULT_PROTECT_LONG_BLOCKS,
)
from .core import (
    InconsistencyInstance,
    MultiSeries,
    RepairReport,
    RepairStructureError,
    RotationPattern,
    TimeInterval,
    rotate_rows,
    rotations_disjoint,
)
from .pipeline import CandidateSchema

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class DeterminationConfig:
    """Thresholds of repair determination."""

    len1: int = DEFAULT_LEN1
    len2: int = DEFAULT_LEN2
    merge_threshold: float = DEFAULT_MERGE_THRESHOLD
    protect_long_blocks: bool = DEFAULT_PROTECT_LONG_BLOCKS

    def __post_init__(self) -> None:
        """Validate the thresholds."""
        if self.len1 < 1 or self.len2 < 1:
            raise RepairStructureError(
                f"len1 and len2 must be at least 1, got {self.len1} and {self.len2}"
            )
        if self.merge_threshold <= 0:
            raise RepairStructureError(
                f"merge_threshold must be positive, got {self.merge_threshold}"
            )


@dataclass(frozen=True)
class RepairUnit:
    """A rotation, the intervals where it was proposed and their total point count."""

    rotation: RotationPattern
    intervals: tuple[TimeInterval, ...]

    @property
    def size(self) -> int:
        """Return the number of time points across all intervals."""
        return sum(interval.length for interval in self.intervals)


def _runs(indices: Sequence[int]) -> list[TimeInterval]:
    """Group sorted time indices into maximal runs of consecutive indices."""
    intervals = []
    start = previous = indices[0]
    for index in indices[1:]:
        if index != previous + 1:
            intervals.append(TimeInterval(start, previous))
            start = index
        previous = index
    intervals.append(TimeInterval(start, previous))
    return intervals


def collect_repair_units(schemas: Sequence[CandidateSchema]) -> list[RepairUnit]:
    """Group proposals by rotation, largest total support first."""
    proposals: dict[RotationPattern, list[int]] = defaultdict(list)
    for schema in schemas:
        for rotation in schema.active_rotations:
            proposals[rotation].append(schema.time_index)
    units = [
        RepairUnit(rotation, tuple(_runs(sorted(indices))))
        for rotation, indices in proposals.items()
    ]
    units.sort(key=lambda unit: (-unit.size, unit.rotation.cycle))
    return units


class DisjointSet:
    """Union-find over time indices with union by size and path halving."""

    def __init__(self, parents: Sequence[int]) -> None:
        """Initialize from a parent array whose roots point at themselves."""
        self._parent = list(parents)
        self._size = Counter(self._parent)

    def find(self, item: int) -> int:
        """Return the root of an item."""
        parent = self._parent
        while parent[item] != item:
            parent[item] = parent[parent[item]]
            item = parent[item]
        return item

    def union(self, first: int, second: int) -> int:
        """Join two sets and return the new root."""
        root_first = self.find(first)
        root_second = self.find(second)
        if root_first == root_second:
            return root_first
        if self._size[root_first] < self._size[root_second]:
            root_first, root_second = root_second, root_first
        self._parent[root_second] = root_first
        self._size[root_first] += self._size.pop(root_second)
        return root_first

    def connected(self, first: int, second: int) -> bool:
        """Return true if both items share a root."""
        return self.find(first) == self.find(second)

    def __len__(self) -> int:
        return len(self._size)


@dataclass(frozen=True)
class Block:
    """A maximal run of equal bits."""

    start: int
    end: int
    bit: int

    @property
    def length(self) -> int:
        """Return the number of time points in the block."""
        return self.end - self.start + 1


class BooleanSequence:
    """Per-rotation 0/1 sequence over the time axis, partitioned into alternating blocks."""

    def __init__(self, rotation: RotationPattern, bits: Sequence[int] | np.ndarray) -> None:
        """Build the block partition from the bits."""
        self.rotation = rotation
        self.bits = np.asarray(bits, dtype=np.int8).copy()
        if self.bits.ndim != 1 or self.bits.size == 0:
            raise RepairStructureError("Boolean sequence needs at least one bit")
        changes = np.flatnonzero(np.diff(self.bits)) + 1
        starts = np.concatenate(([0], changes))
        ends = np.concatenate((changes - 1, [self.bits.size - 1]))
        self._sets = DisjointSet(np.repeat(starts, ends - starts + 1).tolist())
        self._bounds = {
            int(start): Block(int(start), int(end), int(self.bits[start]))
            for start, end in zip(starts, ends)
        }

    def __len__(self) -> int:
        return int(self.bits.size)

    def blocks(self) -> list[Block]:
        """Return the blocks in time order."""
        return list(self._iter_blocks())

    def _iter_blocks(self) -> Iterator[Block]:
        index = 0
        while index < self.bits.size:
            block = self._bounds[self._sets.find(index)]
            yield block
            index = block.end + 1

    def absorb(self, left: Block, middle: Block, right: Block) -> Block:
        """Relabel the middle block to the outer bit and union the three blocks."""
        for block in (left, middle, right):
            del self._bounds[self._sets.find(block.start)]
        self.bits[middle.start : middle.end + 1] = left.bit
        root = self._sets.union(self._sets.union(left.start, middle.start), right.start)
        merged = Block(left.start, right.end, left.bit)
        self._bounds[root] = merged
        return merged


def build_boolean_sequence(
    schemas: Sequence[CandidateSchema],
    rotation: RotationPattern,
    claims: np.ndarray,
) -> BooleanSequence:
    """Set bit k iff schema k proposes the rotation and none of its dimensions is claimed at k."""
    bits = np.zeros(claims.shape[0], dtype=np.int8)
    dims = list(rotation.cycle)
    for schema in schemas:
        if rotation in schema.active_rotations and not claims[schema.time_index, dims].any():
            bits[schema.time_index] = 1
    return BooleanSequence(rotation, bits)


def merge_blocks(sequence: BooleanSequence, config: DeterminationConfig) -> BooleanSequence:
    """Absorb every middle block whose length is small relative to its neighbors.

    A middle block merges when |B_mid| / (|B_left| + |B_right|) < merge_threshold.
    With protect_long_blocks, 1-blocks of at least len2 points are never absorbed.
    Passes repeat until nothing changes.
    """
    changed = True
    while changed:
        changed = False
        blocks = sequence.blocks()
        index = 1
        while index < len(blocks) - 1:
            left, middle, right = blocks[index - 1 : index + 2]
            ratio = middle.length / (left.length + right.length)
            protected = (
                config.protect_long_blocks and middle.bit == 1 and middle.length >= config.len2
            )
            if ratio < config.merge_threshold and not protected:
                blocks[index - 1 : index + 2] = [sequence.absorb(left, middle, right)]
                changed = True
            else:
                index += 1
    return sequence


def extract_intervals(sequence: BooleanSequence, config: DeterminationConfig) -> list[TimeInterval]:
    """Return the 1-blocks of at least len2 points."""
    return [
        TimeInterval(block.start, block.end)
        for block in sequence.blocks()
        if block.bit == 1 and block.length >= config.len2
    ]


def _unclaimed_pieces(
    interval: TimeInterval, rotation: RotationPattern, claims: np.ndarray, min_length: int
) -> list[TimeInterval]:
    """Split an interval where any dimension of the rotation is already claimed."""
    free = ~claims[interval.start : interval.end + 1, list(rotation.cycle)].any(axis=1)
    indices = (np.flatnonzero(free) + interval.start).tolist()
    if not indices:
        return []
    return [piece for piece in _runs(indices) if piece.length >= min_length]


def _sweep_runs(
    accepted: Sequence[tuple[TimeInterval, RotationPattern]],
) -> list[InconsistencyInstance]:
    """Cut overlapping pairs into runs with one fixed set of active rotations."""
    boundaries = sorted(
        {interval.start for interval, _ in accepted} | {interval.end + 1 for interval, _ in accepted}
    )
    instances = []
    current: tuple[frozenset[RotationPattern], int, int] | None = None
    for start, stop in zip(boundaries, boundaries[1:]):
        active = frozenset(
            rotation
            for interval, rotation in accepted
            if interval.start <= start and stop - 1 <= interval.end
        )
        if current is not None and current[0] == active:
            current = (active, current[1], stop - 1)
            continue
        if current is not None and current[0]:
            instances.append(
                InconsistencyInstance(tuple(current[0]), TimeInterval(current[1], current[2]))
            )
        current = (active, start, stop - 1)
    if current is not None and current[0]:
        instances.append(
            InconsistencyInstance(tuple(current[0]), TimeInterval(current[1], current[2]))
        )
    return instances


def assemble_instances(
    accepted: Sequence[tuple[TimeInterval, RotationPattern]],
) -> list[InconsistencyInstance]:
    """Join overlapping accepted repairs into inconsistency instances.

    A group of overlapping intervals becomes one instance over their union when its
    rotations are disjoint, and is split into runs of identical rotation sets otherwise.
    """
    instances: list[InconsistencyInstance] = []
    group: list[tuple[TimeInterval, RotationPattern]] = []
    group_end = -1

    def close_group() -> None:
        if not group:
            return
        rotations = [rotation for _, rotation in group]
        if rotations_disjoint(rotations):
            span = TimeInterval(
                min(interval.start for interval, _ in group),
                max(interval.end for interval, _ in group),
            )
            instances.append(InconsistencyInstance(tuple(rotations), span))
        else:
            instances.extend(_sweep_runs(group))

    for interval, rotation in sorted(accepted, key=lambda item: (item[0], item[1].cycle)):
        if group and interval.start > group_end:
            close_group()
            group = []
        group.append((interval, rotation))
        group_end = max(group_end, interval.end)
    close_group()
    return instances


def determine_repairs(
    schemas: Sequence[CandidateSchema],
    series: MultiSeries,
    config: DeterminationConfig,
) -> tuple[MultiSeries, RepairReport]:
    """Decide the final repairs and apply them to the original series."""
    claims = np.zeros(series.values.shape, dtype=bool)
    values = series.values.copy()
    accepted: list[tuple[TimeInterval, RotationPattern]] = []

    units = [unit for unit in collect_repair_units(schemas) if unit.size >= config.len1]
    for unit in units:
        sequence = merge_blocks(build_boolean_sequence(schemas, unit.rotation, claims), config)
        dims = list(unit.rotation.cycle)
        for interval in extract_intervals(sequence, config):
            for piece in _unclaimed_pieces(interval, unit.rotation, claims, config.len2):
                rotate_rows(values, unit.rotation, piece)
                claims[piece.start : piece.end + 1, dims] = True
                accepted.append((piece, unit.rotation))
                _LOGGER.debug("Repairing %s over [%s, %s]", unit.rotation, piece.start, piece.end)

    report = RepairReport(assemble_instances(accepted), length=series.length, applied=accepted)
    _LOGGER.info(
        "Determined %s inconsistency instances from %s repair units",
        len(report.instances),
        len(units),
    )
    return series.with_values(values), report


def candidate_run_report(schemas: Sequence[CandidateSchema], length: int) -> RepairReport:
    """Report every maximal run of identical non-empty candidate schemas as an instance."""
    instances = []
    run_start = previous = -1
    run_rotations: tuple[RotationPattern, ...] = ()
    for schema in [*schemas, CandidateSchema(length)]:
        rotations = schema.active_rotations
        if rotations != run_rotations or schema.time_index != previous + 1:
            if run_rotations:
                instances.append(
                    InconsistencyInstance(run_rotations, TimeInterval(run_start, previous))
                )
            run_start = schema.time_index
            run_rotations = rotations
        previous = schema.time_index
    return RepairReport(instances, length=length)
