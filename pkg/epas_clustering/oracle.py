"""Exhaustive ground-truth solvers for desk-scale instances."""
from __future__ import absolute_import, annotations

import itertools
import math
from fractions import Fraction

import numpy as np

from .assignment import FRACTION_DENOMINATOR, exact_assign
from .exceptions import ContractViolationError, ResourceLimitError
from .matroid import is_independent
from .model import (Assignment, Capacitated, Fair, FaultTolerant, Infeasible, Instance, Matroid, Solution,
                    WeightedPointSet, solution_cost)
from .utilities import CentersType, is_integral

MAX_CENTER_SETS = 10 ** 5
MAX_ASSIGNMENT_WEIGHT = 10
MAX_ASSIGNMENT_SLOTS = 4


def brute_force_opt(instance: Instance, limit: int = MAX_CENTER_SETS) -> Solution | Infeasible:
    """Cheapest feasible solution over every k-subset of facilities; ties go to the lexicographically first."""
    metric = instance.metric
    if metric.continuous:
        raise ContractViolationError('The exhaustive oracle needs a finite facility set.')
    count = math.comb(len(metric.facilities), instance.k)
    if count > limit:
        raise ResourceLimitError(f'{count} center sets exceed the oracle limit {limit}.')
    matroid = instance.variant.handle if isinstance(instance.variant, Matroid) else None
    P = instance.point_set()
    best = None
    examined = 0
    for X in itertools.combinations(metric.facilities, instance.k):
        if matroid is not None and not is_independent(matroid, X):
            continue
        examined += 1
        f = exact_assign(instance, P, X)
        if not f:
            continue
        cost = solution_cost(instance, P, X, f)
        if best is None or cost < best.cost:
            best = Solution(X, f, cost, metadata={'source': 'oracle'})
    if best is None:
        return Infeasible(f'none of the {examined} center sets admits a feasible assignment', 'oracle')
    return Solution(best.centers, best.assignment, best.cost, metadata={'source': 'oracle', 'examined': examined})


def _options(weight: int, k: int, variant) -> list[tuple[float, ...]]:
    if isinstance(variant, FaultTolerant):
        share = weight / variant.ell
        return [tuple(share if j in chosen else 0.0 for j in range(k))
                for chosen in itertools.combinations(range(k), variant.ell)]
    out = []
    for bars in itertools.combinations(range(weight + k - 1), k - 1):
        edges = (-1,) + bars + (weight + k - 1,)
        out.append(tuple(float(edges[j + 1] - edges[j] - 1) for j in range(k)))
    return out


def brute_force_assignment(instance: Instance, Y: WeightedPointSet, X: CentersType,
                           max_weight: int = MAX_ASSIGNMENT_WEIGHT,
                           max_slots: int = MAX_ASSIGNMENT_SLOTS) -> Assignment | Infeasible:
    """
    Cheapest feasible integral assignment by enumerating every split of every point's weight.

    Fault-tolerant instances enumerate the ell-subsets of slots instead, since that is the only shape they allow.
    """
    k = len(X)
    if k > max_slots:
        raise ResourceLimitError(f'{k} slots exceed the enumeration limit {max_slots}.')
    if any(not is_integral(w) for w in Y.weights):
        raise ContractViolationError('Brute-force assignment needs integral weights.')
    weights = [int(round(w)) for w in Y.weights]
    if sum(weights) > max_weight:
        raise ResourceLimitError(f'total weight {sum(weights)} exceeds the enumeration limit {max_weight}.')
    variant = instance.variant
    costs = np.power(instance.metric.distances(Y.points, list(X)), instance.z)
    caps = [variant.capacity(x) for x in X] if isinstance(variant, Capacitated) else None
    options = [_options(w, k, variant) for w in weights]
    best_cost, best_rows = math.inf, None
    rows: list[tuple[float, ...]] = []
    loads = [0.0] * k

    def fair_ok() -> bool:
        alpha = [Fraction(a).limit_denominator(FRACTION_DENOMINATOR) for a in variant.alpha]
        beta = [Fraction(b).limit_denominator(FRACTION_DENOMINATOR) for b in variant.beta]
        for j in range(k):
            if loads[j] == 0:
                continue
            for g, group in enumerate(variant.groups):
                inside = sum(int(row[j]) for p, row in zip(Y.points, rows) if p in group)
                share = Fraction(inside, int(loads[j]))
                if share < alpha[g] or share > beta[g]:
                    return False
        return True

    def expand(i: int, cost: float):
        nonlocal best_cost, best_rows
        if cost >= best_cost:
            return
        if i == len(weights):
            if isinstance(variant, Fair) and not fair_ok():
                return
            best_cost, best_rows = cost, list(rows)
            return
        for row in options[i]:
            for j in range(k):
                loads[j] += row[j]
            if caps is None or all(loads[j] <= caps[j] for j in range(k)):
                rows.append(row)
                expand(i + 1, cost + math.fsum(row[j] * float(costs[i, j]) for j in range(k)))
                rows.pop()
            for j in range(k):
                loads[j] -= row[j]

    expand(0, 0.0)
    if best_rows is None:
        return Infeasible('no integral assignment meets the constraints', 'oracle')
    return Assignment({(p, j): row[j] for p, row in zip(Y.points, best_rows) for j in range(k) if row[j] > 0})
