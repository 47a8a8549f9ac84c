from __future__ import absolute_import, annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .exceptions import ContractViolationError, ResourceLimitError, UnsupportedVariantError
from .flow import FlowNetwork
from .model import (Assignment, Capacitated, Fair, FaultTolerant, Infeasible, Instance, Matroid, MetricSpace,
                    Vanilla, WeightedPointSet)
from .utilities import WEIGHT_DENOMINATOR, CentersType, is_integral

FAIR_MAX_CELLS = 12
FAIR_MAX_WEIGHT = 60
FAIR_MAX_MATRICES = 10 ** 6
FRACTION_DENOMINATOR = 10 ** 6


def _unit_costs(metric: MetricSpace, Y: WeightedPointSet, X: CentersType, z: float) -> np.ndarray:
    return np.power(metric.distances(Y.points, list(X)), z)


def voronoi_assign(metric: MetricSpace, Y: WeightedPointSet, X: CentersType, z: float) -> Assignment:
    if not X:
        raise ContractViolationError('At least one center is required.')
    costs = _unit_costs(metric, Y, X, z)
    # argmin returns the first minimum, i.e. the lowest slot on ties
    nearest = np.argmin(costs, axis=1) if len(Y) else []
    return Assignment({(p, int(j)): w for p, w, j in zip(Y.points, Y.weights, nearest)})


def capacitated_assign(metric: MetricSpace, Y: WeightedPointSet, X: CentersType, capacities: Sequence[int],
                       z: float) -> Assignment | Infeasible:
    """
    Optimal capacity-respecting assignment by min-cost flow on weights scaled to integers.

    Each slot is its own sink arc, so coinciding centers behave as distinct copies. Rows are rescaled to the
    exact point weights afterwards; ``rounding_bound`` reports the largest load change this can cause.
    """
    if len(capacities) != len(X):
        raise ContractViolationError('One capacity per slot is required.')
    scale = WEIGHT_DENOMINATOR
    scaled = [int(round(w * scale)) for w in Y.weights]
    if sum(scaled) > sum(c * scale for c in capacities):
        return Infeasible(f'total weight {Y.total_weight} exceeds total capacity {sum(capacities)}', 'capacity')
    costs = _unit_costs(metric, Y, X, z)
    net = FlowNetwork()
    point_nodes = [net.add_node() for _ in Y.points]
    slot_nodes = [net.add_node() for _ in X]
    arcs = {}
    for i, s in enumerate(scaled):
        net.add_arc(net.source, point_nodes[i], capacity=s)
        for j, node in enumerate(slot_nodes):
            arcs[i, j] = net.add_arc(point_nodes[i], node, cost=float(costs[i, j]))
    for j, node in enumerate(slot_nodes):
        net.add_arc(node, net.sink, capacity=capacities[j] * scale)
    result = net.min_cost_flow()
    if result.value < sum(scaled):
        return Infeasible(f'only {result.value / scale} of {Y.total_weight} weight can be routed', 'capacity')
    entries = {}
    bound = 0.0
    for i, (p, w) in enumerate(zip(Y.points, Y.weights)):
        if scaled[i] == 0:
            entries[p, int(np.argmin(costs[i]))] = w
            bound += w
            continue
        ratio = w / (scaled[i] / scale)
        for j in range(len(X)):
            units = result.flow_on(arcs[i, j])
            if units:
                entries[p, j] = units / scale * ratio
        bound += abs(w - scaled[i] / scale)
    return Assignment(entries, rounding_bound=bound)


def fault_tolerant_assign(metric: MetricSpace, Y: WeightedPointSet, X: CentersType, ell: int,
                          z: float) -> tuple[Assignment, float, float]:
    """
    Serve each point by its ``ell`` nearest slots with weight w(p)/ell each.

    Returns the assignment, its normalized cost and the original fault-tolerant cost (ell times the former).
    """
    if not 1 <= ell <= len(X):
        raise ContractViolationError(f'ell must lie in [1, {len(X)}], got {ell}.')
    costs = _unit_costs(metric, Y, X, z)
    entries = {}
    for i, (p, w) in enumerate(zip(Y.points, Y.weights)):
        ranked = sorted(range(len(X)), key=lambda j, row=costs[i]: (row[j], j))
        for j in ranked[:ell]:
            entries[p, j] = w / ell
    f = Assignment(entries)
    normalized = _cost_of(costs, Y, f)
    return f, normalized, ell * normalized


def _cost_of(costs: np.ndarray, Y: WeightedPointSet, f: Assignment) -> float:
    row = {p: i for i, p in enumerate(Y.points)}
    return math.fsum(w * float(costs[row[p], j]) for (p, j), w in f.entries.items())


@dataclass(frozen=True)
class ColoringConstraint:
    """Per-slot, per-group weight prescription: ``matrix[i][j]`` is the weight of group j sent to slot i."""
    matrix: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, 'matrix', tuple(tuple(int(v) for v in row) for row in self.matrix))
        if any(v < 0 for row in self.matrix for v in row):
            raise ContractViolationError('Coloring constraint entries must be nonnegative.')

    def column_sums(self) -> tuple[int, ...]:
        return tuple(sum(col) for col in zip(*self.matrix))

    def is_complete(self, group_totals: Sequence[int]) -> bool:
        return self.column_sums() == tuple(group_totals)


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All ways to write ``total`` as an ordered sum of ``parts`` nonnegative integers."""
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for b in bars + (total + parts - 1,):
            out.append(b - prev - 1)
            prev = b
        yield tuple(out)


class _ClassTransport:
    """Signature classes of a fair instance and memoized per-class transport solutions."""

    def __init__(self, metric: MetricSpace, Y: WeightedPointSet, X: CentersType, fair: Fair, z: float):
        for w in Y.weights:
            if not is_integral(w):
                raise ContractViolationError(f'Fair assignment needs integral weights, got {w}.')
        self.k = len(X)
        self.ell = len(fair.groups)
        if self.k * self.ell > FAIR_MAX_CELLS:
            raise ResourceLimitError(f'k * groups = {self.k * self.ell} exceeds the limit {FAIR_MAX_CELLS}.')
        total = round(Y.total_weight)
        if total > FAIR_MAX_WEIGHT:
            raise ResourceLimitError(f'total weight {total} exceeds the limit {FAIR_MAX_WEIGHT}.')
        self.fair = fair
        self.alpha = [Fraction(a).limit_denominator(FRACTION_DENOMINATOR) for a in fair.alpha]
        self.beta = [Fraction(b).limit_denominator(FRACTION_DENOMINATOR) for b in fair.beta]
        self.costs = _unit_costs(metric, Y, X, z)
        signatures = {}
        for i, p in enumerate(Y.points):
            signatures.setdefault(fair.signature(p), []).append(i)
        self.classes = sorted(signatures.items(), key=lambda item: sorted(item[0]))
        self.weights = [int(round(w)) for w in Y.weights]
        self.points = Y.points
        self.class_totals = [sum(self.weights[i] for i in rows) for _, rows in self.classes]
        self._tables: dict[tuple[int, tuple[int, ...]], tuple[float, dict]] = {}

    def transport(self, c: int, column: tuple[int, ...]) -> tuple[float, dict]:
        """Cheapest way to send class ``c`` into the slots with exactly ``column[j]`` weight at slot j."""
        key = (c, column)
        if key not in self._tables:
            rows = self.classes[c][1]
            net = FlowNetwork()
            point_nodes = [net.add_node() for _ in rows]
            slot_nodes = [net.add_node() for _ in range(self.k)]
            arcs = {}
            for a, i in enumerate(rows):
                net.add_arc(net.source, point_nodes[a], capacity=self.weights[i])
                for j in range(self.k):
                    if column[j]:
                        arcs[i, j] = net.add_arc(point_nodes[a], slot_nodes[j], cost=float(self.costs[i, j]))
            for j in range(self.k):
                net.add_arc(slot_nodes[j], net.sink, capacity=column[j])
            result = net.min_cost_flow()
            flows = {(self.points[i], j): result.flow_on(arc) for (i, j), arc in arcs.items()
                     if result.flow_on(arc)}
            self._tables[key] = (result.cost, flows)
        return self._tables[key]

    def class_matrices(self) -> Iterator[tuple[tuple[int, ...], ...]]:
        """Every split of every class total across the k slots, one column per class."""
        per_class = [list(_compositions(t, self.k)) for t in self.class_totals]
        count = math.prod(len(options) for options in per_class)
        if count > FAIR_MAX_MATRICES:
            raise ResourceLimitError(f'{count} class matrices exceed the enumeration limit {FAIR_MAX_MATRICES}.')
        return itertools.product(*per_class)

    def group_matrix(self, columns: tuple[tuple[int, ...], ...]) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(sum(col[j] for (sig, _), col in zip(self.classes, columns) if g in sig)
                           for g in range(self.ell)) for j in range(self.k))

    def is_fair(self, columns: tuple[tuple[int, ...], ...]) -> bool:
        group = self.group_matrix(columns)
        for j in range(self.k):
            load = sum(col[j] for col in columns)
            if load == 0:
                continue
            for g in range(self.ell):
                share = Fraction(group[j][g], load)
                if share < self.alpha[g] or share > self.beta[g]:
                    return False
        return True

    def evaluate(self, columns: tuple[tuple[int, ...], ...]) -> float:
        return math.fsum(self.transport(c, col)[0] for c, col in enumerate(columns))

    def assignment(self, columns: tuple[tuple[int, ...], ...]) -> Assignment:
        entries = {}
        for c, col in enumerate(columns):
            for key, units in self.transport(c, col)[1].items():
                entries[key] = entries.get(key, 0) + units
        return Assignment(entries)


def fair_assign(metric: MetricSpace, Y: WeightedPointSet, X: CentersType, fair: Fair,
                z: float) -> Assignment | Infeasible:
    """
    Exact (alpha, beta)-fair assignment at desk scale.

    Enumerates how much weight of every group-signature class goes to every slot, keeps the splits whose
    group shares pass the bounds in exact rational arithmetic, and prices each class split by a memoized
    transport flow.
    """
    table = _ClassTransport(metric, Y, X, fair, z)
    best, best_columns = math.inf, None
    for columns in table.class_matrices():
        if not table.is_fair(columns):
            continue
        cost = table.evaluate(columns)
        if cost < best:
            best, best_columns = cost, columns
    if best_columns is None:
        return Infeasible('no split of the groups across the slots meets the fairness bounds', 'fairness')
    return table.assignment(best_columns)


def coloring_constraint_costs(metric: MetricSpace, Y: WeightedPointSet, X: CentersType, fair: Fair,
                              z: float) -> dict[ColoringConstraint, float]:
    """Minimum cost of serving Y by X under every reachable complete coloring constraint."""
    table = _ClassTransport(metric, Y, X, fair, z)
    out: dict[ColoringConstraint, float] = {}
    for columns in table.class_matrices():
        constraint = ColoringConstraint(table.group_matrix(columns))
        cost = table.evaluate(columns)
        if cost < out.get(constraint, math.inf):
            out[constraint] = cost
    return out


def exact_assign(instance: Instance, Y: WeightedPointSet, X: CentersType) -> Assignment | Infeasible:
    metric, variant, z = instance.metric, instance.variant, instance.z
    if isinstance(variant, (Vanilla, Matroid)):
        return voronoi_assign(metric, Y, X, z)
    if isinstance(variant, Capacitated):
        return capacitated_assign(metric, Y, X, [variant.capacity(x) for x in X], z)
    if isinstance(variant, FaultTolerant):
        return fault_tolerant_assign(metric, Y, X, variant.ell, z)[0]
    if isinstance(variant, Fair):
        return fair_assign(metric, Y, X, variant, z)
    raise UnsupportedVariantError(f'No exact assignment engine for variant {type(variant).__name__}.')
