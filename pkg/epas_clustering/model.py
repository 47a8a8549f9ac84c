from __future__ import absolute_import, annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, ClassVar, Iterable, Mapping, Sequence

import networkx as nx
import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import (ContractViolationError, SymmetryError, TriangleInequalityError, ZeroDistanceError)
from .matroid import MatroidHandle, is_independent
from .utilities import (FEASIBILITY_RTOL, CenterType, CentersType, EntryKey, MetricKindType, power_distance,
                        within_rtol)

EXHAUSTIVE_TRIANGLE_LIMIT = 64
SAMPLED_TRIANGLES = 20000


def _frozen_array(values: Any) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MetricSpace:
    """
    Finite metric over location indices ``0..N-1``.

    Clients and facilities are index subsets of the same location table. In continuous Euclidean mode the
    facility set is all of R^d and centers are coordinate tuples; ``facilities`` then only lists optional
    declared candidates.
    """
    kind: MetricKindType
    matrix: np.ndarray
    points: tuple[int, ...]
    facilities: tuple[int, ...]
    coordinates: np.ndarray | None = None
    continuous: bool = False
    allow_duplicates: bool = False
    edges: tuple[tuple[Any, Any, float], ...] | None = None
    labels: tuple[Any, ...] | None = None

    def __post_init__(self):
        matrix = _frozen_array(self.matrix)
        object.__setattr__(self, 'matrix', matrix)
        object.__setattr__(self, 'points', tuple(int(p) for p in self.points))
        object.__setattr__(self, 'facilities', tuple(int(f) for f in self.facilities))
        if self.coordinates is not None:
            object.__setattr__(self, 'coordinates', _frozen_array(self.coordinates))
        n = matrix.shape[0]
        if matrix.ndim != 2 or matrix.shape[1] != n:
            raise ContractViolationError(f'Distance matrix must be square, got shape {matrix.shape}.')
        for name, ids in (('points', self.points), ('facilities', self.facilities)):
            if any(not 0 <= i < n for i in ids):
                raise ContractViolationError(f'{name} reference locations outside 0..{n - 1}.')
            if len(set(ids)) != len(ids):
                raise ContractViolationError(f'{name} contain repeated identifiers.')
        if self.continuous and (self.kind != 'euclidean' or self.coordinates is None):
            raise ContractViolationError('Continuous facility mode requires a Euclidean metric with coordinates.')
        if not self.continuous and not self.facilities:
            raise ContractViolationError('A discrete metric needs at least one facility.')
        self._check_metric()

    def _check_metric(self):
        d = self.matrix
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ContractViolationError('Distances must be finite and nonnegative.')
        if np.any(np.diag(d) != 0):
            i = int(np.flatnonzero(np.diag(d))[0])
            raise ContractViolationError(f'dist({i},{i}) must be 0.')
        asym = np.argwhere(np.abs(d - d.T) > FEASIBILITY_RTOL * np.maximum(1.0, np.abs(d)))
        if len(asym):
            a, b = (int(v) for v in asym[0])
            raise SymmetryError(f'dist({a},{b}) = {d[a, b]} differs from dist({b},{a}) = {d[b, a]}.')
        if not self.allow_duplicates:
            for ids in (self.points, self.facilities):
                sub = d[np.ix_(ids, ids)]
                zero = np.argwhere((sub == 0) & ~np.eye(len(ids), dtype=bool))
                if len(zero):
                    a, b = ids[zero[0][0]], ids[zero[0][1]]
                    raise ZeroDistanceError(f'Locations {a} and {b} coincide; declare duplicates to allow this.')
        self._check_triangles()

    def _check_triangles(self):
        d = self.matrix
        n = d.shape[0]
        slack = FEASIBILITY_RTOL * max(1.0, float(d.max(initial=0.0)))
        if n <= EXHAUSTIVE_TRIANGLE_LIMIT:
            # via[a, b, c] = d(a, b) + d(b, c), compared to d(a, c)
            via = d[:, :, None] + d[None, :, :]
            bad = np.argwhere(d[:, None, :] > via + slack)
            if len(bad):
                a, b, c = (int(v) for v in bad[0])
                raise TriangleInequalityError(
                    f'dist({a},{c}) = {d[a, c]} exceeds dist({a},{b}) + dist({b},{c}) = {d[a, b] + d[b, c]}.')
            return
        rng = np.random.default_rng(n)
        triples = rng.integers(0, n, size=(SAMPLED_TRIANGLES, 3))
        a, b, c = triples[:, 0], triples[:, 1], triples[:, 2]
        bad = np.flatnonzero(d[a, c] > d[a, b] + d[b, c] + slack)
        if len(bad):
            i = bad[0]
            raise TriangleInequalityError(f'Sampled triple ({a[i]},{b[i]},{c[i]}) violates the triangle inequality.')

    @classmethod
    def from_matrix(cls, matrix: Sequence[Sequence[float]], points: Iterable[int] = None,
                    facilities: Iterable[int] = None, allow_duplicates: bool = False) -> MetricSpace:
        n = len(matrix)
        points = tuple(range(n)) if points is None else tuple(points)
        facilities = tuple(range(n)) if facilities is None else tuple(facilities)
        return cls('explicit-matrix', np.asarray(matrix, dtype=float), points, facilities,
                   allow_duplicates=allow_duplicates)

    @classmethod
    def from_coordinates(cls, coordinates: Sequence[Sequence[float]], points: Iterable[int] = None,
                         facilities: Iterable[int] = None, continuous: bool = False,
                         allow_duplicates: bool = False) -> MetricSpace:
        coords = np.asarray(coordinates, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        n = coords.shape[0]
        points = tuple(range(n)) if points is None else tuple(points)
        if facilities is None:
            facilities = () if continuous else tuple(range(n))
        return cls('euclidean', cdist(coords, coords), points, tuple(facilities), coordinates=coords,
                   continuous=continuous, allow_duplicates=allow_duplicates)

    @classmethod
    def from_graph(cls, edges: Iterable[tuple[Any, Any, float]], points: Iterable[Any],
                   facilities: Iterable[Any], allow_duplicates: bool = False) -> MetricSpace:
        edges = tuple((u, v, float(w)) for u, v, w in edges)
        graph = nx.Graph()
        graph.add_weighted_edges_from(edges)
        points, facilities = list(points), list(facilities)
        graph.add_nodes_from(points + facilities)
        labels = tuple(sorted(graph.nodes, key=repr))
        index = {label: i for i, label in enumerate(labels)}
        n = len(labels)
        matrix = np.full((n, n), np.inf)
        for source, lengths in nx.all_pairs_dijkstra_path_length(graph, weight='weight'):
            for target, length in lengths.items():
                matrix[index[source], index[target]] = length
        if not np.all(np.isfinite(matrix)):
            raise ContractViolationError('Graph metric is disconnected between declared locations.')
        return cls('graph-shortest-path', matrix, tuple(index[p] for p in points),
                   tuple(index[f] for f in facilities), allow_duplicates=allow_duplicates, edges=edges,
                   labels=labels)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def dimension(self) -> int:
        return 0 if self.coordinates is None else self.coordinates.shape[1]

    def location(self, center: CenterType) -> np.ndarray:
        if isinstance(center, tuple):
            return np.asarray(center, dtype=float)
        return self.coordinates[center]

    def distance(self, a: CenterType, b: CenterType) -> float:
        if not isinstance(a, tuple) and not isinstance(b, tuple):
            return float(self.matrix[a, b])
        return float(np.linalg.norm(self.location(a) - self.location(b)))

    def distances(self, points: Sequence[int], centers: Sequence[CenterType]) -> np.ndarray:
        """Matrix of distances, one row per point and one column per center."""
        points = list(points)
        if not centers:
            return np.zeros((len(points), 0))
        if any(isinstance(c, tuple) for c in centers):
            locs = np.array([self.location(c) for c in centers], dtype=float)
            return cdist(self.coordinates[points], locs)
        return self.matrix[np.ix_(points, list(centers))]

    def distances_from(self, center: CenterType, targets: Sequence[int]) -> np.ndarray:
        return self.distances(targets, [center])[:, 0]


@dataclass(frozen=True)
class Vanilla:
    name: ClassVar[str] = 'vanilla'


@dataclass(frozen=True)
class Capacitated:
    capacities: Mapping[int, int] = field(default_factory=dict)
    uniform_capacity: int | None = None
    name: ClassVar[str] = 'capacitated'

    def __post_init__(self):
        object.__setattr__(self, 'capacities', MappingProxyType({int(f): int(c) for f, c in self.capacities.items()}))
        if any(c <= 0 for c in self.capacities.values()):
            raise ContractViolationError('Capacities must be positive integers.')
        if self.uniform_capacity is not None and self.uniform_capacity <= 0:
            raise ContractViolationError('Uniform capacity must be a positive integer.')

    def capacity(self, center: CenterType) -> int:
        if isinstance(center, tuple) or center not in self.capacities:
            if self.uniform_capacity is None:
                raise ContractViolationError(f'No capacity declared for center {center}.')
            return self.uniform_capacity
        return self.capacities[center]

    def __hash__(self):
        return hash((tuple(sorted(self.capacities.items())), self.uniform_capacity))


@dataclass(frozen=True)
class Matroid:
    handle: MatroidHandle
    name: ClassVar[str] = 'matroid'


@dataclass(frozen=True)
class FaultTolerant:
    ell: int
    name: ClassVar[str] = 'fault-tolerant'


@dataclass(frozen=True)
class Fair:
    groups: tuple[frozenset[int], ...]
    alpha: tuple[float, ...]
    beta: tuple[float, ...]
    name: ClassVar[str] = 'fair'

    def __post_init__(self):
        object.__setattr__(self, 'groups', tuple(frozenset(int(p) for p in g) for g in self.groups))
        object.__setattr__(self, 'alpha', tuple(float(a) for a in self.alpha))
        object.__setattr__(self, 'beta', tuple(float(b) for b in self.beta))
        if not len(self.groups) == len(self.alpha) == len(self.beta):
            raise ContractViolationError('Fair groups, alpha and beta must have equal length.')
        for i, (a, b) in enumerate(zip(self.alpha, self.beta)):
            if not 0 <= a <= 1 or not 0 <= b <= 1:
                raise ContractViolationError(f'Fairness bounds of group {i} must lie in [0, 1].')
            if a > b:
                raise ContractViolationError(f'Group {i} has alpha {a} > beta {b}.')

    def signature(self, point: int) -> frozenset[int]:
        return frozenset(i for i, g in enumerate(self.groups) if point in g)


VariantType = Vanilla | Capacitated | Matroid | FaultTolerant | Fair


@dataclass(frozen=True, eq=False)
class Instance:
    metric: MetricSpace
    k: int
    z: float = 1.0
    epsilon: float = 0.5
    weights: tuple[float, ...] = None
    variant: VariantType = field(default_factory=Vanilla)
    name: str | None = None

    def __post_init__(self):
        if self.weights is None:
            object.__setattr__(self, 'weights', tuple(1.0 for _ in self.metric.points))
        object.__setattr__(self, 'weights', tuple(float(w) for w in self.weights))
        if len(self.weights) != len(self.metric.points):
            raise ContractViolationError('One weight per client point is required.')
        if any(w < 0 or not math.isfinite(w) for w in self.weights):
            raise ContractViolationError('Weights must be finite and nonnegative.')
        if not isinstance(self.k, int) or self.k < 1:
            raise ContractViolationError(f'k must be a positive integer, got {self.k}.')
        if self.z < 1:
            raise ContractViolationError(f'z must be at least 1, got {self.z}.')
        if not 0 < self.epsilon <= 0.5:
            raise ContractViolationError(f'epsilon must lie in (0, 1/2], got {self.epsilon}.')
        if not self.metric.continuous and self.k > len(self.metric.facilities):
            raise ContractViolationError(f'k = {self.k} exceeds the {len(self.metric.facilities)} facilities.')
        self._check_variant()

    def _check_variant(self):
        variant = self.variant
        if isinstance(variant, FaultTolerant) and not 1 <= variant.ell <= self.k:
            raise ContractViolationError(f'ell must lie in [1, k], got {variant.ell}.')
        if isinstance(variant, Capacitated) and not self.metric.continuous:
            missing = [f for f in self.metric.facilities if f not in variant.capacities]
            if missing and variant.uniform_capacity is None:
                raise ContractViolationError(f'Facilities {missing} have no capacity.')
        if isinstance(variant, Matroid):
            if self.metric.continuous:
                raise ContractViolationError('Matroid constraints need a finite facility set.')
            if set(variant.handle.ground) != set(self.metric.facilities):
                raise ContractViolationError('Matroid ground set must equal the facility set.')
        if isinstance(variant, Fair):
            points = set(self.metric.points)
            for i, g in enumerate(variant.groups):
                if not g <= points:
                    raise ContractViolationError(f'Group {i} contains unknown points {sorted(g - points)}.')
            lonely = [p for p in self.metric.points if not variant.signature(p)]
            if lonely:
                raise ContractViolationError(f'Points {lonely} belong to no fairness group.')

    @property
    def points(self) -> tuple[int, ...]:
        return self.metric.points

    @property
    def weight_of(self) -> dict[int, float]:
        return dict(zip(self.metric.points, self.weights))

    @property
    def gamma(self) -> int:
        """Number of distinct group-membership signatures (1 for non-fair instances)."""
        if not isinstance(self.variant, Fair):
            return 1
        return len({self.variant.signature(p) for p in self.metric.points})

    def point_set(self) -> WeightedPointSet:
        kept = [(p, w) for p, w in zip(self.metric.points, self.weights) if w > 0]
        return WeightedPointSet(tuple(p for p, _ in kept), tuple(w for _, w in kept))

    def replace(self, **changes) -> Instance:
        values = {'metric': self.metric, 'k': self.k, 'z': self.z, 'epsilon': self.epsilon,
                  'weights': self.weights, 'variant': self.variant, 'name': self.name}
        values.update(changes)
        return Instance(**values)


@dataclass(frozen=True)
class WeightedPointSet:
    points: tuple[int, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, 'points', tuple(int(p) for p in self.points))
        object.__setattr__(self, 'weights', tuple(float(w) for w in self.weights))
        if len(self.points) != len(self.weights):
            raise ContractViolationError('Coreset points and weights must align.')
        if len(set(self.points)) != len(self.points):
            raise ContractViolationError('Coreset points must be distinct.')
        if any(w <= 0 for w in self.weights):
            raise ContractViolationError('Coreset weights must be positive.')

    def __len__(self):
        return len(self.points)

    @property
    def total_weight(self) -> float:
        return math.fsum(self.weights)

    @property
    def weight_of(self) -> dict[int, float]:
        return dict(zip(self.points, self.weights))


@dataclass(frozen=True)
class Assignment:
    entries: Mapping[EntryKey, float]
    rounding_bound: float = 0.0

    def __post_init__(self):
        cleaned = {(int(p), int(j)): float(w) for (p, j), w in dict(self.entries).items() if w > 0}
        object.__setattr__(self, 'entries', MappingProxyType(dict(sorted(cleaned.items()))))

    def __hash__(self):
        return hash(tuple(self.entries.items()))

    def __eq__(self, other):
        return isinstance(other, Assignment) and dict(self.entries) == dict(other.entries)

    def point_total(self, point: int) -> float:
        return math.fsum(w for (p, _), w in self.entries.items() if p == point)

    def slot_load(self, slot: int) -> float:
        return math.fsum(w for (_, j), w in self.entries.items() if j == slot)

    def slots_of(self, point: int) -> dict[int, float]:
        return {j: w for (p, j), w in self.entries.items() if p == point}

    def triples(self) -> list[tuple[int, int, float]]:
        return [(p, j, w) for (p, j), w in self.entries.items()]


@dataclass(frozen=True)
class Infeasible:
    reason: str
    tag: str = 'infeasible'

    def __bool__(self):
        return False


@dataclass(frozen=True)
class Violation:
    constraint: str
    detail: str
    point: int | None = None
    slot: int | None = None


@dataclass(frozen=True, eq=False)
class Solution:
    centers: CentersType
    assignment: Assignment
    cost: float
    flags: frozenset[str] = frozenset()
    metadata: Mapping[str, Any] = field(default_factory=dict)

    @property
    def budget_exhausted(self) -> bool:
        return 'budget-exhausted' in self.flags


def _check_slots(X: CentersType, f: Assignment):
    k = len(X)
    for (p, j) in f.entries:
        if not 0 <= j < k:
            raise ContractViolationError(f'Assignment of point {p} uses slot {j} outside [0, {k}).')


def solution_cost(instance: Instance, Y: WeightedPointSet, X: CentersType, f: Assignment) -> float:
    _check_slots(X, f)
    domain = set(Y.points)
    foreign = {p for p, _ in f.entries if p not in domain}
    if foreign:
        raise ContractViolationError(f'Assignment covers points {sorted(foreign)} outside the point set.')
    metric = instance.metric
    return math.fsum(w * power_distance(metric.distance(p, X[j]), instance.z) for (p, j), w in f.entries.items())


def validate_assignment(instance: Instance, Y: WeightedPointSet, X: CentersType, f: Assignment) -> list[Violation]:
    """Every way the assignment breaks the variant's constraints; an empty list means it is feasible."""
    violations = []
    k = len(X)
    weight = Y.weight_of
    for (p, j) in f.entries:
        if not 0 <= j < k:
            violations.append(Violation('slot-range', f'slot {j} outside [0, {k})', point=p, slot=j))
        if p not in weight:
            violations.append(Violation('point-domain', f'point {p} not in the point set', point=p, slot=j))
    for p, w in weight.items():
        total = f.point_total(p)
        if abs(total - w) > FEASIBILITY_RTOL * w:
            violations.append(Violation('completeness', f'point {p} assigned {total} of weight {w}', point=p))
    variant = instance.variant
    if isinstance(variant, Capacitated):
        for j, center in enumerate(X):
            load, cap = f.slot_load(j), variant.capacity(center)
            if load > cap * (1 + FEASIBILITY_RTOL) + f.rounding_bound:
                violations.append(Violation('capacity', f'capacity exceeded at slot {j}: {load} > {cap}', slot=j))
    elif isinstance(variant, FaultTolerant):
        for p, w in weight.items():
            share = w / variant.ell
            slots = f.slots_of(p)
            if len(slots) != variant.ell:
                violations.append(Violation('fault-tolerance', f'point {p} served by {len(slots)} slots, '
                                                               f'expected {variant.ell}', point=p))
            for j, v in slots.items():
                if not within_rtol(v, share):
                    violations.append(Violation('fault-tolerance', f'point {p} sends {v} to slot {j}, '
                                                                   f'expected {share}', point=p, slot=j))
    elif isinstance(variant, Fair):
        for j in range(k):
            load = f.slot_load(j)
            if load <= 0:
                continue
            for i, group in enumerate(variant.groups):
                share = math.fsum(w for (p, s), w in f.entries.items() if s == j and p in group) / load
                if share < variant.alpha[i] - FEASIBILITY_RTOL or share > variant.beta[i] + FEASIBILITY_RTOL:
                    violations.append(Violation('fairness', f'group {i} holds share {share:.6g} of slot {j}, '
                                                            f'outside [{variant.alpha[i]}, {variant.beta[i]}]',
                                                slot=j))
    return violations


def validate_centers(instance: Instance, X: CentersType) -> list[Violation]:
    violations = []
    metric = instance.metric
    if len(X) != instance.k:
        violations.append(Violation('center-count', f'{len(X)} centers given, expected {instance.k}'))
    for j, center in enumerate(X):
        if isinstance(center, tuple):
            if not metric.continuous:
                violations.append(Violation('facility', f'slot {j} holds a coordinate in a discrete metric', slot=j))
            elif len(center) != metric.dimension:
                violations.append(Violation('facility', f'slot {j} has dimension {len(center)}', slot=j))
        elif center not in metric.facilities:
            violations.append(Violation('facility', f'slot {j} holds non-facility {center}', slot=j))
    variant = instance.variant
    discrete = [c for c in X if not isinstance(c, tuple)]
    if isinstance(variant, (Capacitated, FaultTolerant, Matroid)) and len(set(discrete)) != len(discrete):
        violations.append(Violation('distinct', 'the variant requires distinct facilities'))
    if isinstance(variant, Matroid) and set(discrete) <= set(variant.handle.ground):
        if not is_independent(variant.handle, set(discrete)):
            violations.append(Violation('matroid', f'centers {sorted(discrete)} are dependent'))
    return violations


def pairwise_cost_matrix(instance: Instance, Y: WeightedPointSet, X: CentersType) -> np.ndarray:
    """Per-unit-weight cost d(p, x_j)^z, one row per point of Y."""
    d = instance.metric.distances(Y.points, list(X))
    return np.power(d, instance.z)
