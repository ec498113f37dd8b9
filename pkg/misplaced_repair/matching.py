"""Bipartite matching between observed values and sequence models."""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
import heapq
import logging
import math

import numpy as np

from .behavior import SequenceModel, membership_grid
from .const import MATCHER_EXACT, MATCHER_GREEDY
from .core import RepairStructureError

_LOGGER = logging.getLogger(__name__)

INFINITY = math.inf
EPSILON = 1e-12


@dataclass(frozen=True)
class WeightMatrix:
    """Square grid over anomalous dimensions.

    Cell (n, m) is the probability that the value observed in dims[m]
    conforms to the model of dims[n].
    """

    dims: tuple[int, ...]
    weights: np.ndarray

    def __post_init__(self) -> None:
        """Validate shape and range."""
        weights = np.array(self.weights, dtype=float)
        if weights.ndim != 2 or weights.shape[0] != weights.shape[1]:
            raise RepairStructureError(f"Weight matrix must be square, got shape {weights.shape}")
        dims = tuple(int(dim) for dim in self.dims) or tuple(range(weights.shape[0]))
        if len(dims) != weights.shape[0]:
            raise RepairStructureError(
                f"Weight matrix has {weights.shape[0]} rows for {len(dims)} dimensions"
            )
        if len(set(dims)) != len(dims):
            raise RepairStructureError(f"Weight matrix repeats a dimension: {dims}")
        if np.isnan(weights).any() or weights.min() < 0 or weights.max() > 1:
            raise RepairStructureError("Weights must lie in [0, 1]")
        weights.flags.writeable = False
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_models(
        cls, models: Sequence[SequenceModel], row: np.ndarray, dims: Sequence[int]
    ) -> WeightMatrix:
        """Score every anomalous value against every anomalous dimension's model."""
        selected = [models[dim] for dim in dims]
        return cls(tuple(dims), membership_grid(selected, np.asarray(row)[list(dims)]))

    @property
    def size(self) -> int:
        """Return |A|."""
        return len(self.dims)


@dataclass(frozen=True)
class Matching:
    """A perfect matching: {source dimension: model dimension}."""

    assignment: dict[int, int]
    total_weight: float


class FlowEdge:
    """Residual edge of a flow network."""

    __slots__ = ("src", "dst", "cap", "cost", "flow", "reverse")

    def __init__(self, src: int, dst: int, cap: int, cost: float) -> None:
        """Initialize an edge without flow."""
        self.src = src
        self.dst = dst
        self.cap = cap
        self.cost = cost
        self.flow = 0
        self.reverse: FlowEdge | None = None

    @property
    def residual(self) -> int:
        """Return the remaining capacity."""
        return self.cap - self.flow


class FlowNetwork:
    """Directed network solved by successive shortest paths with node potentials."""

    def __init__(self) -> None:
        """Initialize an empty network."""
        self.adjacency: list[list[FlowEdge]] = []

    def add_vertex(self) -> int:
        """Add a vertex and return its id."""
        self.adjacency.append([])
        return len(self.adjacency) - 1

    def add_edge(self, src: int, dst: int, *, cap: int = 1, cost: float = 0.0) -> FlowEdge:
        """Add an edge and its zero-capacity reverse."""
        edge = FlowEdge(src, dst, cap, cost)
        reverse = FlowEdge(dst, src, 0, -cost)
        edge.reverse = reverse
        reverse.reverse = edge
        self.adjacency[src].append(edge)
        self.adjacency[dst].append(reverse)
        return edge

    def _initial_potentials(self, source: int) -> list[float]:
        # Bellman-Ford; edge costs may be negative before the first augmentation
        potentials = [INFINITY] * len(self.adjacency)
        potentials[source] = 0.0
        for _stage in range(len(self.adjacency) - 1):
            changed = False
            for edges in self.adjacency:
                for edge in edges:
                    if edge.residual > 0 and potentials[edge.src] < INFINITY:
                        candidate = potentials[edge.src] + edge.cost
                        if candidate < potentials[edge.dst] - EPSILON:
                            potentials[edge.dst] = candidate
                            changed = True
            if not changed:
                break
        return [0.0 if value == INFINITY else value for value in potentials]

    def _shortest_path(
        self, source: int, sink: int, potentials: list[float]
    ) -> tuple[list[float], list[FlowEdge | None]]:
        # Dijkstra on reduced costs
        distances = [INFINITY] * len(self.adjacency)
        parents: list[FlowEdge | None] = [None] * len(self.adjacency)
        distances[source] = 0.0
        heap = [(0.0, source)]
        while heap:
            distance, vertex = heapq.heappop(heap)
            if distance > distances[vertex] + EPSILON:
                continue
            for edge in self.adjacency[vertex]:
                if edge.residual <= 0:
                    continue
                reduced = edge.cost + potentials[edge.src] - potentials[edge.dst]
                candidate = distance + max(reduced, 0.0)
                if candidate < distances[edge.dst] - EPSILON:
                    distances[edge.dst] = candidate
                    parents[edge.dst] = edge
                    heapq.heappush(heap, (candidate, edge.dst))
        return distances, parents

    def min_cost_max_flow(self, source: int, sink: int) -> tuple[int, float]:
        """Push the maximum flow from source to sink at minimum total cost."""
        potentials = self._initial_potentials(source)
        total_flow = 0
        total_cost = 0.0
        while True:
            distances, parents = self._shortest_path(source, sink, potentials)
            if distances[sink] == INFINITY:
                break
            for vertex, distance in enumerate(distances):
                if distance < INFINITY:
                    potentials[vertex] += distance

            path = []
            vertex = sink
            while vertex != source:
                edge = parents[vertex]
                path.append(edge)
                vertex = edge.src
            pushed = min(edge.residual for edge in path)
            for edge in path:
                edge.flow += pushed
                edge.reverse.flow -= pushed
                total_cost += pushed * edge.cost
            total_flow += pushed
        return total_flow, total_cost


def _check_matchable(matrix: WeightMatrix) -> None:
    if matrix.size < 2:
        raise RepairStructureError(f"Matching needs at least two dimensions, got {matrix.size}")


def mcmf_match(matrix: WeightMatrix) -> Matching:
    """Return the maximum-weight perfect matching via min-cost max-flow."""
    _check_matchable(matrix)
    size = matrix.size
    network = FlowNetwork()
    source = network.add_vertex()
    sources = [network.add_vertex() for _ in range(size)]
    targets = [network.add_vertex() for _ in range(size)]
    sink = network.add_vertex()

    for column in range(size):
        network.add_edge(source, sources[column])
    cells: dict[tuple[int, int], FlowEdge] = {}
    for column in range(size):
        for row in range(size):
            cells[(row, column)] = network.add_edge(
                sources[column], targets[row], cost=-float(matrix.weights[row, column])
            )
    for row in range(size):
        network.add_edge(targets[row], sink)

    flow, _cost = network.min_cost_max_flow(source, sink)
    if flow != size:
        raise RepairStructureError(f"Flow network matched {flow} of {size} dimensions")

    assignment = {}
    total_weight = 0.0
    for (row, column), edge in sorted(cells.items(), key=lambda item: item[0][::-1]):
        if edge.flow == 1:
            assignment[matrix.dims[column]] = matrix.dims[row]
            total_weight += float(matrix.weights[row, column])
    return Matching(assignment, total_weight)


def greedy_match(matrix: WeightMatrix) -> Matching:
    """Repeatedly fix the heaviest remaining cell; ties go to the lowest (row, column)."""
    _check_matchable(matrix)
    size = matrix.size
    cells = sorted(
        (-float(matrix.weights[row, column]), row, column)
        for row in range(size)
        for column in range(size)
    )
    used_rows: set[int] = set()
    used_columns: set[int] = set()
    assignment = {}
    total_weight = 0.0
    for negative_weight, row, column in cells:
        if row in used_rows or column in used_columns:
            continue
        used_rows.add(row)
        used_columns.add(column)
        assignment[matrix.dims[column]] = matrix.dims[row]
        total_weight -= negative_weight
        if len(assignment) == size:
            break
    return Matching(dict(sorted(assignment.items())), total_weight)


MATCHER_FUNCTIONS = {
    MATCHER_EXACT: mcmf_match,
    MATCHER_GREEDY: greedy_match,
}


def match(matrix: WeightMatrix, matcher: str) -> Matching:
    """Run the named matcher."""
    try:
        matcher_function = MATCHER_FUNCTIONS[matcher]
    except KeyError as err:
        raise RepairStructureError(f"Unknown matcher: {matcher}") from err
    return matcher_function(matrix)


def matching_to_mapping(matching: Matching) -> dict[int, int]:
    """Return the matching as a permutation of the involved dimensions."""
    mapping = dict(matching.assignment)
    if set(mapping) != set(mapping.values()):
        raise RepairStructureError(f"Matching is not bijective: {mapping}")
    return mapping
