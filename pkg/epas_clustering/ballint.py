from __future__ import absolute_import, annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .exceptions import ContractViolationError
from .matroid import MatroidHandle, matroid_intersection
from .model import Capacitated, Infeasible, Instance, Matroid, MetricSpace
from .utilities import FEASIBILITY_RTOL, CenterType, CentersType

PROJECTION_ITERATION_CONSTANT = 16


@dataclass(frozen=True)
class Request:
    point: int
    radius: float

    def __post_init__(self):
        if not self.radius > 0 or not math.isfinite(self.radius):
            raise ContractViolationError(f'Request radius must be positive and finite, got {self.radius}.')


@dataclass(frozen=True)
class RequestSet:
    """Insertion-ordered requests of one slot; the order is the slot's scattering sequence."""
    requests: tuple[Request, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'requests', tuple(self.requests))
        if len(set(self.requests)) != len(self.requests):
            raise ContractViolationError('A request set cannot hold the same request twice.')

    def __len__(self):
        return len(self.requests)

    def __iter__(self):
        return iter(self.requests)

    def add(self, point: int, radius: float) -> RequestSet:
        return RequestSet(self.requests + (Request(point, radius),))

    @property
    def points(self) -> list[int]:
        return [r.point for r in self.requests]

    @property
    def radii(self) -> np.ndarray:
        return np.array([r.radius for r in self.requests], dtype=float)


def _slack(eta: float) -> float:
    return (1 + eta) * (1 + FEASIBILITY_RTOL)


def satisfies(x: CenterType, Q: RequestSet, eta: float, m: MetricSpace) -> bool:
    if eta < 0:
        raise ContractViolationError(f'eta must be nonnegative, got {eta}.')
    if not len(Q):
        return True
    d = m.distances(Q.points, [x])[:, 0]
    return bool(np.all(d <= _slack(eta) * Q.radii))


def filter_candidates(m: MetricSpace, candidates: Sequence[int], Q: RequestSet | Iterable[Request],
                      eta: float) -> tuple[int, ...]:
    """Candidates, in their given order, that satisfy every request in ``Q`` at slack ``eta``."""
    requests = list(Q)
    if not requests or not candidates:
        return tuple(candidates)
    points = [r.point for r in requests]
    radii = np.array([r.radius for r in requests], dtype=float)
    ok = np.all(m.matrix[np.ix_(points, list(candidates))] <= _slack(eta) * radii[:, None], axis=0)
    return tuple(c for c, keep in zip(candidates, ok) if keep)


def discrete_ball_int(m: MetricSpace, candidates: Sequence[int], Q: RequestSet, eta: float) -> int | None:
    satisfying = filter_candidates(m, candidates, Q, eta)
    return satisfying[0] if satisfying else None


def capacitated_ball_int(m: MetricSpace, candidates: Sequence[int], Q: RequestSet, eta: float,
                         capacity: Callable[[int], int]) -> int | None:
    return _max_capacity(filter_candidates(m, candidates, Q, eta), capacity)


def _max_capacity(satisfying: Sequence[int], capacity: Callable[[int], int]) -> int | None:
    best = None
    for c in satisfying:
        if best is None or capacity(c) > capacity(best):
            best = c
    return best


def euclidean_ball_int(m: MetricSpace, Q: RequestSet, eta: float,
                       dim: int) -> tuple[tuple[float, ...] | None, bool]:
    """
    Continuous ball intersection by cyclic projection onto balls inflated to (1 + eta/2) r.

    Returns ``(center, unproven)``. A ``None`` center is exact when two requests are disjoint at slack 0;
    otherwise the failure is heuristic and ``unproven`` is set.
    """
    if dim < 1:
        raise ContractViolationError(f'Dimension must be positive, got {dim}.')
    if not len(Q):
        return tuple(0.0 for _ in range(dim)), False
    if eta <= 0:
        raise ContractViolationError('Continuous ball intersection needs positive slack.')
    centers = m.coordinates[Q.points]
    radii = Q.radii
    inflated = (1 + eta / 2) * radii
    x = centers.mean(axis=0)
    iterations = int(math.ceil(PROJECTION_ITERATION_CONSTANT / eta ** 2))
    for _ in range(iterations):
        d = np.linalg.norm(centers - x, axis=1)
        if np.all(d <= _slack(eta) * radii):
            return tuple(float(v) for v in x), False
        worst = int(np.argmax(d / inflated))
        x = centers[worst] + (x - centers[worst]) * (inflated[worst] / d[worst])
    gaps = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=2) - (radii[:, None] + radii[None, :])
    if np.any(gaps > FEASIBILITY_RTOL * max(1.0, float(radii.max()))):
        return None, False
    logging.warning('Ball intersection of %s requests gave up without a disjointness certificate.', len(Q))
    return None, True


def select_centers(instance: Instance, satisfying: Sequence[Sequence[int]]) -> CentersType | Infeasible:
    """Pick one center per slot from each slot's satisfying candidates, honouring the center constraints."""
    variant = instance.variant
    if any(not s for s in satisfying):
        slot = next(i for i, s in enumerate(satisfying) if not s)
        return Infeasible(f'no candidate satisfies the requests of slot {slot}', 'ball-int')
    if isinstance(variant, Capacitated):
        return tuple(_max_capacity(s, variant.capacity) for s in satisfying)
    if isinstance(variant, Matroid):
        return _matroid_select(variant.handle, satisfying, instance.k)
    return tuple(s[0] for s in satisfying)


def _matroid_select(handle: MatroidHandle, satisfying: Sequence[Sequence[int]],
                    k: int) -> CentersType | Infeasible:
    groups = [frozenset(s) for s in satisfying]
    used = frozenset().union(*groups)
    rest = frozenset(handle.ground) - used
    if sum(len(g) for g in groups) != len(used):
        raise ContractViolationError('Matroid slots need disjoint candidate groups.')
    parts = list(groups) + ([rest] if rest else [])
    limits = [1] * len(groups) + ([0] if rest else [])
    one_per_slot = MatroidHandle.partition(parts, limits)
    common = matroid_intersection(handle, one_per_slot)
    if len(common) < k:
        return Infeasible(f'largest independent transversal has {len(common)} of {k} centers', 'ball-int')
    return tuple(next(iter(common & g)) for g in groups)


def gen_ball_int(instance: Instance, colors: Sequence[Sequence[int]], Qs: Sequence[RequestSet],
                 eta: float) -> CentersType | Infeasible:
    if len(Qs) != instance.k or (not instance.metric.continuous and len(colors) != instance.k):
        raise ContractViolationError('One request set and one color class per slot are required.')
    metric = instance.metric
    if metric.continuous:
        centers = []
        for i, Q in enumerate(Qs):
            x, unproven = euclidean_ball_int(metric, Q, eta, metric.dimension)
            if x is None:
                return Infeasible(f'requests of slot {i} have no common point', 'unproven' if unproven else 'ball-int')
            centers.append(x)
        return tuple(centers)
    return select_centers(instance, [filter_candidates(metric, colors[i], Q, eta) for i, Q in enumerate(Qs)])
