from __future__ import absolute_import, annotations

import itertools
import json
import logging
import math
from pathlib import Path
from typing import Annotated, Any, Literal, Union

import networkx as nx
import numpy as np
from pydantic import (BaseModel, ConfigDict, Field, NonNegativeFloat, NonNegativeInt, PositiveInt, ValidationError,
                      field_validator, model_validator)

from .base import ClusteringBase
from .exceptions import ContractViolationError, SchemaError
from .matroid import MatroidHandle
from .model import (Assignment, Capacitated, Fair, FaultTolerant, Infeasible, Instance, Matroid, MetricSpace,
                    Solution, Vanilla, Violation, validate_assignment, validate_centers, solution_cost)
from .utilities import (COST_RTOL, DOCUMENT_VERSION, FAMILIES, VARIANT_NAMES, CentersType, FamilyType,
                        VariantNameType)

Label = Union[int, str]
SUITE_Z_VALUES = (1.0, 2.0)


class _Document(BaseModel):
    model_config = ConfigDict(extra='forbid')


class MatrixMetricDocument(_Document):
    kind: Literal['explicit-matrix']
    matrix: list[list[NonNegativeFloat]]
    points: list[NonNegativeInt] | None = None
    facilities: list[NonNegativeInt] | None = None
    allow_duplicates: bool = False


class EuclideanMetricDocument(_Document):
    kind: Literal['euclidean']
    coordinates: list[list[float]]
    points: list[NonNegativeInt] | None = None
    facilities: list[NonNegativeInt] | None = None
    continuous: bool = False
    allow_duplicates: bool = False


class GraphMetricDocument(_Document):
    kind: Literal['graph-shortest-path']
    edges: list[tuple[Label, Label, NonNegativeFloat]]
    points: list[Label]
    facilities: list[Label]
    allow_duplicates: bool = False


MetricDocument = Annotated[Union[MatrixMetricDocument, EuclideanMetricDocument, GraphMetricDocument],
                           Field(discriminator='kind')]


class VanillaDocument(_Document):
    name: Literal['vanilla'] = 'vanilla'


class CapacitatedDocument(_Document):
    name: Literal['capacitated']
    capacities: list[tuple[Label, PositiveInt]] = Field(default_factory=list)
    uniform_capacity: PositiveInt | None = None


class MatroidDocument(_Document):
    name: Literal['matroid']
    kind: Literal['uniform', 'partition', 'explicit']
    rank: NonNegativeInt | None = None
    parts: list[list[Label]] = Field(default_factory=list)
    limits: list[NonNegativeInt] = Field(default_factory=list)
    bases: list[list[Label]] = Field(default_factory=list)


class FaultTolerantDocument(_Document):
    name: Literal['fault-tolerant']
    ell: PositiveInt


class FairDocument(_Document):
    name: Literal['fair']
    groups: list[list[Label]]
    alpha: list[Annotated[float, Field(ge=0, le=1)]]
    beta: list[Annotated[float, Field(ge=0, le=1)]]

    @model_validator(mode='after')
    def check_bounds(self) -> FairDocument:
        if not len(self.groups) == len(self.alpha) == len(self.beta):
            raise ValueError('groups, alpha and beta must have equal length')
        for i, (a, b) in enumerate(zip(self.alpha, self.beta)):
            if a > b:
                raise ValueError(f'group {i} has alpha {a} > beta {b}')
        return self


VariantDocument = Annotated[Union[VanillaDocument, CapacitatedDocument, MatroidDocument, FaultTolerantDocument,
                                  FairDocument], Field(discriminator='name')]


class InstanceDocument(_Document):
    """Versioned instance document; graph metrics reference locations by label, the others by index."""
    version: int = DOCUMENT_VERSION
    name: str | None = None
    metric: MetricDocument
    weights: list[NonNegativeFloat] | None = None
    k: PositiveInt
    z: float = Field(default=1.0, ge=1)
    epsilon: float = Field(default=0.5, gt=0, le=0.5)
    variant: VariantDocument = Field(default_factory=VanillaDocument)

    @field_validator('version')
    @classmethod
    def check_version(cls, value: int) -> int:
        if value != DOCUMENT_VERSION:
            raise ValueError(f'unsupported document version {value}, expected {DOCUMENT_VERSION}')
        return value


class SolutionDocument(_Document):
    version: int = DOCUMENT_VERSION
    instance: str | None = None
    status: Literal['ok', 'infeasible', 'budget-exhausted']
    reason: str | None = None
    tag: str | None = None
    centers: list[int | list[float]] = Field(default_factory=list)
    assignment: list[tuple[NonNegativeInt, NonNegativeInt, NonNegativeFloat]] = Field(default_factory=list)
    cost: NonNegativeFloat | None = None
    flags: list[str] = Field(default_factory=list)
    budgets_hit: list[str] = Field(default_factory=list)
    oracle_cost: NonNegativeFloat | None = None
    oracle_gap: float | None = None
    metadata: dict[str, Any] = Field(default_factory=dict)
    trace: list[dict[str, Any]] | None = None


def _schema_error(e: ValidationError) -> SchemaError:
    err = e.errors()[0]
    path = '.'.join(str(p) for p in err['loc']) or '<root>'
    return SchemaError(f'{path}: {err["msg"]}')


def _validate(model: type[BaseModel], document: Any) -> Any:
    if isinstance(document, model):
        return document
    try:
        if isinstance(document, (str, bytes)):
            return model.model_validate_json(document)
        return model.model_validate(document)
    except ValidationError as e:
        raise _schema_error(e) from e


def _build_metric(doc: MetricDocument) -> MetricSpace:
    if isinstance(doc, MatrixMetricDocument):
        return MetricSpace.from_matrix(doc.matrix, doc.points, doc.facilities, allow_duplicates=doc.allow_duplicates)
    if isinstance(doc, EuclideanMetricDocument):
        return MetricSpace.from_coordinates(doc.coordinates, doc.points, doc.facilities, continuous=doc.continuous,
                                            allow_duplicates=doc.allow_duplicates)
    return MetricSpace.from_graph(doc.edges, doc.points, doc.facilities, allow_duplicates=doc.allow_duplicates)


def _resolver(metric: MetricSpace):
    if metric.labels is None:
        return int
    index = {label: i for i, label in enumerate(metric.labels)}

    def resolve(label: Label) -> int:
        try:
            return index[label]
        except KeyError:
            raise ContractViolationError(f'Unknown location label {label!r}.') from None

    return resolve


def _labeller(metric: MetricSpace):
    if metric.labels is None:
        return int
    return lambda i: metric.labels[i]


def _build_variant(doc: VariantDocument, metric: MetricSpace):
    resolve = _resolver(metric)
    if isinstance(doc, CapacitatedDocument):
        return Capacitated({resolve(f): c for f, c in doc.capacities}, doc.uniform_capacity)
    if isinstance(doc, MatroidDocument):
        ground = metric.facilities
        if doc.kind == 'uniform':
            if doc.rank is None:
                raise ContractViolationError('A uniform matroid block needs a rank.')
            handle = MatroidHandle.uniform(ground, doc.rank)
        elif doc.kind == 'partition':
            handle = MatroidHandle.partition([[resolve(e) for e in part] for part in doc.parts], doc.limits)
        else:
            handle = MatroidHandle.explicit(ground, [[resolve(e) for e in b] for b in doc.bases])
        return Matroid(handle)
    if isinstance(doc, FaultTolerantDocument):
        return FaultTolerant(doc.ell)
    if isinstance(doc, FairDocument):
        return Fair(tuple(frozenset(resolve(p) for p in g) for g in doc.groups), tuple(doc.alpha), tuple(doc.beta))
    return Vanilla()


def parse_instance(document: str | bytes | dict | InstanceDocument) -> Instance:
    """
    Build and validate an Instance from a document.

    Schema problems raise SchemaError naming the offending path; metric and model violations raise their own
    errors (SymmetryError, TriangleInequalityError, ContractViolationError, ...).
    """
    doc = _validate(InstanceDocument, document)
    metric = _build_metric(doc.metric)
    variant = _build_variant(doc.variant, metric)
    weights = None if doc.weights is None else tuple(doc.weights)
    return Instance(metric, doc.k, doc.z, doc.epsilon, weights, variant, doc.name)


def _metric_document(metric: MetricSpace) -> MetricDocument:
    if metric.kind == 'graph-shortest-path':
        label = _labeller(metric)
        return GraphMetricDocument(kind='graph-shortest-path', edges=[list(e) for e in metric.edges],
                                   points=[label(p) for p in metric.points],
                                   facilities=[label(f) for f in metric.facilities],
                                   allow_duplicates=metric.allow_duplicates)
    if metric.kind == 'euclidean':
        return EuclideanMetricDocument(kind='euclidean', coordinates=metric.coordinates.tolist(),
                                       points=list(metric.points), facilities=list(metric.facilities),
                                       continuous=metric.continuous, allow_duplicates=metric.allow_duplicates)
    return MatrixMetricDocument(kind='explicit-matrix', matrix=metric.matrix.tolist(), points=list(metric.points),
                                facilities=list(metric.facilities), allow_duplicates=metric.allow_duplicates)


def _variant_document(instance: Instance) -> VariantDocument:
    variant = instance.variant
    label = _labeller(instance.metric)

    def labelled(ids) -> list[Label]:
        return [label(i) for i in sorted(ids)]

    if isinstance(variant, Capacitated):
        return CapacitatedDocument(name='capacitated', uniform_capacity=variant.uniform_capacity,
                                   capacities=[(label(f), c) for f, c in sorted(variant.capacities.items())])
    if isinstance(variant, Matroid):
        handle = variant.handle
        if handle.kind == 'uniform':
            return MatroidDocument(name='matroid', kind='uniform', rank=handle.rank)
        if handle.kind == 'partition':
            pairs = sorted(zip(handle.parts, handle.limits), key=lambda pair: min(pair[0]))
            return MatroidDocument(name='matroid', kind='partition', parts=[labelled(p) for p, _ in pairs],
                                   limits=[v for _, v in pairs])
        if handle.kind == 'explicit':
            return MatroidDocument(name='matroid', kind='explicit',
                                   bases=sorted((labelled(b) for b in handle.bases), key=repr))
        raise ContractViolationError(f'Matroid kind \'{handle.kind}\' has no document form.')
    if isinstance(variant, FaultTolerant):
        return FaultTolerantDocument(name='fault-tolerant', ell=variant.ell)
    if isinstance(variant, Fair):
        return FairDocument(name='fair', groups=[labelled(g) for g in variant.groups], alpha=list(variant.alpha),
                            beta=list(variant.beta))
    return VanillaDocument()


def to_document(instance: Instance) -> InstanceDocument:
    return InstanceDocument(name=instance.name, metric=_metric_document(instance.metric),
                            weights=list(instance.weights), k=instance.k, z=instance.z, epsilon=instance.epsilon,
                            variant=_variant_document(instance))


def _canonical(model: BaseModel) -> str:
    # json renders floats with the shortest round-trip repr
    return json.dumps(model.model_dump(mode='json', exclude_none=True), sort_keys=True, separators=(',', ':'))


def serialize_instance(instance: Instance | InstanceDocument) -> str:
    """Canonical JSON: sorted keys, compact separators, shortest round-trip reals."""
    doc = instance if isinstance(instance, InstanceDocument) else to_document(instance)
    return _canonical(doc)


def _uniform_points(rng: np.random.Generator, count: int, dimension: int) -> np.ndarray:
    return np.round(rng.uniform(0.0, 100.0, size=(count, dimension)), 6)


def _variant_block(variant: VariantNameType, n: int, f: int, k: int, facility_labels: list[Label],
                   point_labels: list[Label], rng: np.random.Generator) -> VariantDocument:
    if variant == 'capacitated':
        base = int(math.ceil(n / k))
        caps = rng.integers(base, base + 3, size=f)
        return CapacitatedDocument(name='capacitated', capacities=[(lab, int(c)) for lab, c in zip(facility_labels, caps)])
    if variant == 'matroid':
        parts = [facility_labels[0::2], facility_labels[1::2]]
        limits = [k - k // 2, k // 2]
        if not parts[1]:
            parts, limits = parts[:1], limits[:1]
        return MatroidDocument(name='matroid', kind='partition', parts=parts, limits=limits)
    if variant == 'fault-tolerant':
        return FaultTolerantDocument(name='fault-tolerant', ell=min(2, k))
    if variant == 'fair':
        order = rng.permutation(n)
        half = max(1, n // 2)
        groups = [sorted(point_labels[i] for i in order[:half]), sorted(point_labels[i] for i in order[half:])]
        groups = [g for g in groups if g]
        return FairDocument(name='fair', groups=groups, alpha=[0.25] * len(groups), beta=[0.75] * len(groups))
    return VanillaDocument()


def _random_metric_matrix(total: int, rng: np.random.Generator) -> list[list[float]]:
    graph = nx.Graph()
    graph.add_nodes_from(range(total))
    for v in range(1, total):
        graph.add_edge(v, int(rng.integers(v)), weight=float(rng.integers(1, 20)))
    for u in range(total):
        for v in range(u + 1, total):
            if not graph.has_edge(u, v) and rng.random() < 0.3:
                graph.add_edge(u, v, weight=float(rng.integers(1, 20)))
    return nx.floyd_warshall_numpy(graph, nodelist=list(range(total)), weight='weight').tolist()


def generate_instance(family: FamilyType, n: int, f: int, k: int, z: float = 1.0,
                      variant: VariantNameType = 'vanilla', seed: int = 0, epsilon: float = 0.5,
                      dimension: int = 2) -> InstanceDocument:
    """
    Seeded desk-scale instance document.

    Clients take locations ``0..n-1`` and facilities ``n..n+f-1``, except on grid graphs where both are sampled
    from the grid nodes.
    """
    if family not in FAMILIES:
        raise ContractViolationError(f'Family \'{family}\' not supported. Use one of {FAMILIES}.')
    if variant not in VARIANT_NAMES:
        raise ContractViolationError(f'Variant \'{variant}\' not supported. Use one of {VARIANT_NAMES}.')
    if n < 1 or f < 1 or not 1 <= k <= f:
        raise ContractViolationError(f'Sizes need n >= 1 and 1 <= k <= f, got n={n}, f={f}, k={k}.')
    rng = np.random.default_rng(seed)
    points, facilities = list(range(n)), list(range(n, n + f))
    if family == 'euclidean-uniform':
        metric = EuclideanMetricDocument(kind='euclidean', coordinates=_uniform_points(rng, n + f, dimension).tolist(),
                                         points=points, facilities=facilities)
    elif family == 'clustered-gaussian':
        centers = _uniform_points(rng, k, dimension)
        clients = centers[rng.integers(k, size=n)] + rng.normal(0.0, 2.0, size=(n, dimension))
        sites = _uniform_points(rng, f, dimension)
        planted = min(k, f)
        sites[:planted] = centers[:planted] + rng.normal(0.0, 1.0, size=(planted, dimension))
        metric = EuclideanMetricDocument(kind='euclidean', coordinates=np.round(np.vstack([clients, sites]), 6).tolist(),
                                         points=points, facilities=facilities)
    elif family == 'random-metric':
        metric = MatrixMetricDocument(kind='explicit-matrix', matrix=_random_metric_matrix(n + f, rng),
                                      points=points, facilities=facilities)
    else:
        side = int(math.ceil(math.sqrt(max(n, f)))) + 1
        grid = nx.convert_node_labels_to_integers(nx.grid_2d_graph(side, side), ordering='sorted')
        nodes = sorted(grid.nodes)
        points = sorted(int(v) for v in rng.choice(nodes, size=n, replace=False))
        facilities = sorted(int(v) for v in rng.choice(nodes, size=f, replace=False))
        metric = GraphMetricDocument(kind='graph-shortest-path', edges=[(u, v, 1.0) for u, v in sorted(grid.edges)],
                                     points=points, facilities=facilities)
    name = f'{family}-{variant}-n{n}-f{f}-k{k}-s{seed}'
    return InstanceDocument(name=name, metric=metric, weights=[1.0] * n, k=k, z=z, epsilon=epsilon,
                            variant=_variant_block(variant, n, f, k, facilities, points, rng))


def _center_value(center) -> int | list[float]:
    return [float(v) for v in center] if isinstance(center, tuple) else int(center)


def serialize_solution(result: Solution | Infeasible, instance_name: str = None,
                       oracle_cost: float = None) -> str:
    """Solution document with sparse (point, slot, weight) assignment triples; infeasible results keep their tag."""
    if not result:
        doc = SolutionDocument(instance=instance_name, status='infeasible', reason=result.reason, tag=result.tag)
        return _canonical(doc)
    metadata = {key: value for key, value in result.metadata.items() if key != 'trace'}
    gap = None
    if oracle_cost is not None:
        gap = result.cost / oracle_cost if oracle_cost > 0 else (1.0 if result.cost == 0 else math.inf)
    doc = SolutionDocument(instance=instance_name, status='budget-exhausted' if result.budget_exhausted else 'ok',
                           centers=[_center_value(c) for c in result.centers],
                           assignment=result.assignment.triples(), cost=result.cost, flags=sorted(result.flags),
                           budgets_hit=list(result.metadata.get('budgets_hit', [])), oracle_cost=oracle_cost,
                           oracle_gap=gap, metadata=metadata, trace=result.metadata.get('trace'))
    return _canonical(doc)


def parse_solution(document: str | bytes | dict | SolutionDocument) -> Solution | Infeasible:
    doc = _validate(SolutionDocument, document)
    if doc.status == 'infeasible':
        return Infeasible(doc.reason or '', doc.tag or 'infeasible')
    centers: CentersType = tuple(tuple(c) if isinstance(c, list) else c for c in doc.centers)
    assignment = Assignment({(p, j): w for p, j, w in doc.assignment})
    return Solution(centers, assignment, doc.cost, frozenset(doc.flags), dict(doc.metadata))


def revalidate_solution(instance: Instance, document: str | bytes | dict | SolutionDocument) -> list[Violation]:
    """Re-check a solution document against its instance: centers, assignment constraints and reported cost."""
    result = parse_solution(document)
    if not result:
        return []
    P = instance.point_set()
    violations = validate_centers(instance, result.centers) + validate_assignment(instance, P, result.centers,
                                                                                   result.assignment)
    if violations:
        return violations
    cost = solution_cost(instance, P, result.centers, result.assignment)
    if result.cost is None or abs(cost - result.cost) > COST_RTOL * max(1.0, abs(cost)):
        violations.append(Violation('cost', f'reported cost {result.cost} differs from recomputed {cost}'))
    return violations


class InstanceLibrary(ClusteringBase):
    """Document I/O and seeded instance generation."""

    def __init__(self, workers: int = None, instance_name: str = None, progress_bar_desc: str = None):
        super().__init__(workers=workers, instance_name=instance_name, progress_bar_desc=progress_bar_desc)

    @staticmethod
    def load_instance(path: str | Path, **overrides) -> Instance:
        """Read an instance document, replacing top-level fields (``epsilon``, ``variant``, ...) first."""
        text = Path(path).read_text()
        if overrides:
            try:
                data = json.loads(text)
            except json.JSONDecodeError as e:
                raise SchemaError(f'<root>: invalid JSON ({e.msg} at line {e.lineno})') from e
            if not isinstance(data, dict):
                raise SchemaError('<root>: an instance document must be a JSON object')
            data.update({key: value for key, value in overrides.items() if value is not None})
            instance = parse_instance(data)
        else:
            instance = parse_instance(text)
        logging.info('Loaded instance %s with %s points and k = %s.', instance.name, len(instance.points), instance.k)
        return instance

    @staticmethod
    def save_instance(instance: Instance | InstanceDocument, path: str | Path):
        Path(path).write_text(serialize_instance(instance))

    @staticmethod
    def load_solution(path: str | Path) -> Solution | Infeasible:
        return parse_solution(Path(path).read_text())

    @staticmethod
    def generate(family: FamilyType, n: int, f: int, k: int, z: float = 1.0, variant: VariantNameType = 'vanilla',
                 seed: int = 0, epsilon: float = 0.5) -> Instance:
        return parse_instance(generate_instance(family, n, f, k, z, variant, seed, epsilon))

    def generate_suite(self, size: int, seed: int = 0, families: list[FamilyType] = None,
                       variants: list[VariantNameType] = None, epsilons: list[float] = None,
                       max_points: int = 8, max_facilities: int = 5, max_k: int = 2) -> list[Instance]:
        """Seeded suite cycling through a shuffled grid of families, variants, z in {1, 2} and the given epsilons."""
        families = families or FAMILIES
        variants = variants or VARIANT_NAMES
        epsilons = epsilons or [0.5]
        rng = np.random.default_rng(seed)
        grid = list(itertools.product(families, variants, SUITE_Z_VALUES, epsilons))
        order = rng.permutation(len(grid))
        suite = []
        for i in range(size):
            family, variant, z, epsilon = grid[order[i % len(grid)]]
            f = int(rng.integers(2, max_facilities + 1))
            k = int(rng.integers(1, min(max_k, f) + 1))
            n = int(rng.integers(k, max_points + 1))
            doc = generate_instance(family, n, f, k, z=z, variant=variant, seed=seed * 10_000 + i, epsilon=epsilon)
            suite.append(parse_instance(doc))
        logging.info('%s generated a suite of %s instances.', self.instance_name, len(suite))
        return suite
