from __future__ import absolute_import, annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .assignment import coloring_constraint_costs, exact_assign
from .exceptions import ContractViolationError, UnsupportedVariantError
from .matroid import is_independent
from .model import Fair, Instance, Matroid, WeightedPointSet, solution_cost
from .utilities import CentersType

DEFAULT_SAMPLE_CONSTANT = 4.0
EXHAUSTIVE_AUDIT_LIMIT = 10 ** 5
SAMPLED_AUDIT_SETS = 2000


def identity_coreset(instance: Instance) -> WeightedPointSet:
    """The client points with their own weights (zero-weight points carry no cost and are left out)."""
    return instance.point_set()


def _merge_colocated(instance: Instance) -> WeightedPointSet:
    P = instance.point_set()
    if not len(P):
        return P
    d = instance.metric.distances(P.points, P.points)
    merged: dict[int, float] = {}
    for i in range(len(P)):
        twin = next(j for j in range(i + 1) if d[i, j] == 0)
        rep = P.points[twin]
        merged[rep] = merged.get(rep, 0.0) + P.weights[i]
    return WeightedPointSet(tuple(merged), tuple(merged.values()))


def _seed(instance: Instance, P: WeightedPointSet, count: int, rng: np.random.Generator) -> list[int]:
    """D^z seeding: each new seed is drawn with probability proportional to w(p) d(p, seeds)^z."""
    weights = np.array(P.weights)
    chosen = [int(rng.choice(len(P), p=weights / weights.sum()))]
    nearest = instance.metric.distances(P.points, [P.points[chosen[0]]])[:, 0]
    while len(chosen) < count:
        mass = weights * np.power(nearest, instance.z)
        if mass.sum() <= 0:
            break
        nxt = int(rng.choice(len(P), p=mass / mass.sum()))
        chosen.append(nxt)
        nearest = np.minimum(nearest, instance.metric.distances(P.points, [P.points[nxt]])[:, 0])
    return chosen


def ring_sampling_coreset(instance: Instance, epsilon: float, seed: int,
                          constant: float = DEFAULT_SAMPLE_CONSTANT) -> WeightedPointSet:
    """
    Generic sampling coreset for general metrics.

    Seeds O(k log n) centers by D^z sampling, splits every seed's cluster into doubling distance rings around
    the mean cluster radius, and keeps ``ceil(constant * k * ln n / epsilon^2)`` uniform samples per ring,
    rescaled so each ring keeps its total weight.
    """
    if not 0 < epsilon < 1:
        raise ContractViolationError(f'epsilon must lie in (0, 1), got {epsilon}.')
    P = _merge_colocated(instance)
    n = len(P)
    if n == 0:
        return P
    per_ring = max(1, int(math.ceil(constant * instance.k * math.log(n) / epsilon ** 2)))
    if n <= per_ring:
        return P
    rng = np.random.default_rng(seed)
    seeds = _seed(instance, P, min(n, instance.k * int(math.ceil(math.log(n) + 1))), rng)
    d = instance.metric.distances(P.points, [P.points[s] for s in seeds])
    owner = np.argmin(d, axis=1)
    dist = d[np.arange(n), owner]
    weights = np.array(P.weights)
    mean_radius = (float(np.dot(weights, np.power(dist, instance.z))) / weights.sum()) ** (1 / instance.z)
    if mean_radius > 0:
        rings = np.where(dist <= mean_radius, 0,
                         np.ceil(np.log2(np.maximum(dist, mean_radius) / mean_radius)).astype(int))
    else:
        rings = np.zeros(n, dtype=int)
    kept: dict[int, float] = {}
    for key in sorted(set(zip(owner.tolist(), rings.tolist()))):
        members = np.flatnonzero((owner == key[0]) & (rings == key[1]))
        if len(members) > per_ring:
            sample = np.sort(rng.choice(members, size=per_ring, replace=False))
            scale = weights[members].sum() / weights[sample].sum()
        else:
            sample, scale = members, 1.0
        for i in sample:
            kept[P.points[i]] = float(weights[i] * scale)
    logging.info('Ring-sampling coreset kept %s of %s points.', len(kept), n)
    ordered = sorted(kept)
    return WeightedPointSet(tuple(ordered), tuple(kept[p] for p in ordered))


@dataclass(frozen=True)
class CoresetAudit:
    max_error: float
    checked: int
    exhaustive: bool
    one_sided: tuple[CentersType, ...] = field(default_factory=tuple)
    worst: CentersType | None = None


def _candidates(instance: Instance) -> list[int]:
    metric = instance.metric
    return list(metric.facilities) if metric.facilities else list(metric.points)


def candidate_center_sets(instance: Instance, limit: int = EXHAUSTIVE_AUDIT_LIMIT,
                          samples: int = SAMPLED_AUDIT_SETS, seed: int = 0) -> tuple[Iterator[CentersType], bool]:
    """Every k-subset of the candidates when there are at most ``limit`` of them, else a seeded sample."""
    candidates = _candidates(instance)
    k = instance.k
    if k > len(candidates):
        raise ContractViolationError(f'k = {k} exceeds the {len(candidates)} candidate centers.')
    matroid = instance.variant.handle if isinstance(instance.variant, Matroid) else None

    def allowed(C):
        return matroid is None or is_independent(matroid, C)

    if math.comb(len(candidates), k) <= limit:
        return (C for C in itertools.combinations(candidates, k) if allowed(C)), True
    rng = np.random.default_rng(seed)

    def sampled():
        for _ in range(samples):
            C = tuple(sorted(int(c) for c in rng.choice(candidates, size=k, replace=False)))
            if allowed(C):
                yield C

    return sampled(), False


def _compare(coreset_cost: float, full_cost: float) -> tuple[float | None, bool]:
    """(relative error, one-sided) with None when both sides are infinite.

    One-sided infinities and a single zero-cost side count as error 1.
    """
    if math.isinf(coreset_cost) and math.isinf(full_cost):
        return None, False
    if math.isinf(coreset_cost) or math.isinf(full_cost):
        return 1.0, True
    if full_cost == 0:
        return (0.0 if coreset_cost == 0 else 1.0), False
    return abs(coreset_cost - full_cost) / full_cost, False


def _assigned_cost(instance: Instance, Y: WeightedPointSet, C: CentersType) -> float:
    f = exact_assign(instance, Y, C)
    return solution_cost(instance, Y, C, f) if f else math.inf


def _coreset_comparison(instance: Instance, coreset: WeightedPointSet, C: CentersType) -> tuple[float | None, bool]:
    return _compare(_assigned_cost(instance, coreset, C), _assigned_cost(instance, instance.point_set(), C))


def _universal_comparison(instance: Instance, coreset: WeightedPointSet,
                          C: CentersType) -> tuple[float | None, bool]:
    variant = instance.variant
    full = coloring_constraint_costs(instance.metric, instance.point_set(), C, variant, instance.z)
    reduced = coloring_constraint_costs(instance.metric, coreset, C, variant, instance.z)
    worst, one_sided = None, False
    for M in set(full) | set(reduced):
        err, lopsided = _compare(reduced.get(M, math.inf), full.get(M, math.inf))
        one_sided = one_sided or lopsided
        if err is not None and (worst is None or err > worst):
            worst = err
    return worst, one_sided


def coreset_error(instance: Instance, coreset: WeightedPointSet, C: CentersType) -> float | None:
    return _coreset_comparison(instance, coreset, C)[0]


def universal_coreset_error(instance: Instance, coreset: WeightedPointSet, C: CentersType) -> float | None:
    """Worst relative error over every coloring constraint reachable by either side."""
    return _universal_comparison(instance, coreset, C)[0]


def _audit(instance: Instance, coreset: WeightedPointSet, measure, center_sets: Iterable[CentersType],
           exhaustive: bool, workers: int) -> CoresetAudit:
    center_sets = list(center_sets)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda C: measure(instance, coreset, C), center_sets))
    else:
        outcomes = [measure(instance, coreset, C) for C in center_sets]
    worst, worst_set, one_sided = 0.0, None, []
    for C, (err, lopsided) in zip(center_sets, outcomes):
        if lopsided:
            one_sided.append(C)
        if err is not None and err > worst:
            worst, worst_set = err, C
    if one_sided:
        logging.warning('%s center sets are feasible on only one side of the coreset audit.', len(one_sided))
    return CoresetAudit(worst, len(center_sets), exhaustive, tuple(one_sided), worst_set)


def audit_coreset(instance: Instance, coreset: WeightedPointSet, epsilon: float = None,
                  center_sets: Iterable[CentersType] = None, seed: int = 0, workers: int = 1) -> CoresetAudit:
    """
    Maximum relative cost error of ``coreset`` over the candidate center sets, priced by the exact engine.

    ``epsilon`` is only reported against: the audit measures, it does not decide.
    """
    exhaustive = True
    if center_sets is None:
        center_sets, exhaustive = candidate_center_sets(instance, seed=seed)
    result = _audit(instance, coreset, _coreset_comparison, center_sets, exhaustive, workers)
    if epsilon is not None and result.max_error > epsilon:
        logging.info('Coreset audit error %.4g exceeds epsilon %.4g.', result.max_error, epsilon)
    return result


def audit_universal_coreset(instance: Instance, coreset: WeightedPointSet,
                            center_sets: Iterable[CentersType] = None, seed: int = 0,
                            workers: int = 1) -> CoresetAudit:
    if not isinstance(instance.variant, Fair):
        raise UnsupportedVariantError('Universal coreset audits are defined for fair instances only.')
    exhaustive = True
    if center_sets is None:
        center_sets, exhaustive = candidate_center_sets(instance, seed=seed)
    return _audit(instance, coreset, _universal_comparison, center_sets, exhaustive, workers)
