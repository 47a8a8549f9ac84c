from __future__ import absolute_import, annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import ContractViolationError
from .model import MetricSpace
from .utilities import FEASIBILITY_RTOL, CenterType

EXHAUSTIVE_PAIR_LIMIT = 200
DEFAULT_NODE_BUDGET = 200_000
DEFAULT_RESTARTS = 32
DEFAULT_BOUND_CONSTANT = 8.0
MAX_PROBED_RADII = 48


@dataclass(frozen=True)
class ScatterTriple:
    center: CenterType
    point: int
    radius: float


@dataclass(frozen=True)
class ScatteringSequence:
    triples: tuple[ScatterTriple, ...] = ()

    def __len__(self):
        return len(self.triples)

    def prefix(self, length: int) -> ScatteringSequence:
        return ScatteringSequence(self.triples[:length])

    @property
    def radii(self) -> list[float]:
        return [t.radius for t in self.triples]


@dataclass(frozen=True)
class ScatterViolation:
    """First broken condition; indices are 1-based, ``later`` is set for covering violations."""
    condition: str
    index: int
    later: int | None = None


@dataclass(frozen=True)
class ScatterSearchResult:
    sequence: ScatteringSequence
    exhaustive: bool
    partial: bool = False
    nodes: int = 0


def validate_scattering(seq: ScatteringSequence, epsilon: float, m: MetricSpace,
                        covering_slack: float = 0.0) -> ScatterViolation | None:
    """
    Check both scattering conditions, returning the first violation or ``None`` when the sequence is valid.

    Each triple's center must be more than (1 + epsilon) radii away from its own point, and every later center
    must lie within (1 + covering_slack) radii of every earlier point. Sequences produced by a ball intersection
    with slack eta are checked with ``covering_slack = eta``.
    """
    if not 0 < epsilon < 1:
        raise ContractViolationError(f'epsilon must lie in (0, 1), got {epsilon}.')
    triples = seq.triples
    for i, t in enumerate(triples):
        if not m.distance(t.center, t.point) > (1 + epsilon) * t.radius:
            return ScatterViolation('separation', i + 1)
    for j in range(1, len(triples)):
        for i in range(j):
            t = triples[i]
            if m.distance(triples[j].center, t.point) > (1 + covering_slack) * t.radius * (1 + FEASIBILITY_RTOL):
                return ScatterViolation('covering', i + 1, j + 1)
    return None


def per_radius_counts(seq: ScatteringSequence) -> dict[float, int]:
    return dict(Counter(seq.radii))


def per_radius_class_counts(seq: ScatteringSequence, epsilon: float, unit: float = 1.0) -> dict[int, int]:
    """Counts per geometric radius class: class j holds radii in [unit (1+epsilon)^j, unit (1+epsilon)^(j+1))."""
    ratio = math.log1p(epsilon)
    return dict(Counter(int(math.floor(math.log(r / unit) / ratio + 1e-9)) for r in seq.radii))


class _FixedRadiusSearch:
    def __init__(self, m: MetricSpace, epsilon: float, radius: float):
        self.points = list(m.points)
        self.centers = list(m.facilities)
        d = m.matrix[np.ix_(self.centers, self.points)]
        self.far = d > (1 + epsilon) * radius
        self.near = d <= radius * (1 + FEASIBILITY_RTOL)

    def options(self, chosen_points: list[int], used_centers: set[int]) -> list[int]:
        """Center positions still within radius of every chosen point."""
        ok = np.ones(len(self.centers), dtype=bool)
        for p in chosen_points:
            ok &= self.near[:, p]
        return [c for c in np.flatnonzero(ok) if c not in used_centers]

    def to_sequence(self, pairs: list[tuple[int, int]], radius: float) -> ScatteringSequence:
        return ScatteringSequence(tuple(ScatterTriple(self.centers[c], self.points[p], radius) for c, p in pairs))


def longest_scattering(m: MetricSpace, epsilon: float, radius: float, budget: int = DEFAULT_NODE_BUDGET,
                       seed: int = 0, restarts: int = DEFAULT_RESTARTS) -> ScatterSearchResult:
    """
    Longest fixed-radius scattering sequence.

    Exhaustive branch-and-bound when |P| * |F| is small (true maximum unless the node budget runs out, which
    flags the result as partial), otherwise randomized greedy with restarts.
    """
    if m.continuous:
        raise ContractViolationError('Scattering search needs a finite facility set.')
    if radius <= 0:
        raise ContractViolationError(f'Radius must be positive, got {radius}.')
    search = _FixedRadiusSearch(m, epsilon, radius)
    if len(search.points) * len(search.centers) <= EXHAUSTIVE_PAIR_LIMIT:
        return _exhaustive(search, radius, budget)
    return _greedy(search, radius, seed, restarts)


def _exhaustive(search: _FixedRadiusSearch, radius: float, budget: int) -> ScatterSearchResult:
    best: list[tuple[int, int]] = []
    nodes = 0
    partial = False

    def expand(pairs: list[tuple[int, int]], used: set[int]):
        nonlocal best, nodes, partial
        nodes += 1
        if nodes > budget:
            partial = True
            return
        if len(pairs) > len(best):
            best = list(pairs)
        chosen = [p for _, p in pairs]
        options = search.options(chosen, used)
        if len(pairs) + len(options) <= len(best):
            return
        for c in options:
            for p in np.flatnonzero(search.far[c]):
                pairs.append((int(c), int(p)))
                used.add(c)
                expand(pairs, used)
                used.discard(c)
                pairs.pop()
                if partial:
                    return

    expand([], set())
    if partial:
        logging.warning('Scattering search stopped after %s nodes; the length %s is a lower bound.', budget, len(best))
    return ScatterSearchResult(search.to_sequence(best, radius), exhaustive=True, partial=partial, nodes=nodes)


def _greedy(search: _FixedRadiusSearch, radius: float, seed: int, restarts: int) -> ScatterSearchResult:
    rng = np.random.default_rng(seed)
    best: list[tuple[int, int]] = []
    for _ in range(max(1, restarts)):
        pairs: list[tuple[int, int]] = []
        used: set[int] = set()
        while True:
            options = search.options([p for _, p in pairs], used)
            moves = [(int(c), int(p)) for c in options for p in np.flatnonzero(search.far[c])]
            if not moves:
                break
            c, p = moves[int(rng.integers(len(moves)))]
            pairs.append((c, p))
            used.add(c)
        if len(pairs) > len(best):
            best = pairs
    return ScatterSearchResult(search.to_sequence(best, radius), exhaustive=False, nodes=restarts)


@dataclass(frozen=True)
class IntervalBoundReport:
    count: int
    bound: float
    passed: bool


def radius_interval_count_bound_check(seq: ScatteringSequence, epsilon: float,
                                      intervals: Sequence[tuple[float, float]], lambda_hat: float,
                                      c_l: float = DEFAULT_BOUND_CONSTANT) -> IntervalBoundReport:
    """
    Count triples whose radius falls in any ``[a, tau * a]`` interval and compare with
    ``c_l * sum(lambda_hat * ln(tau)) / epsilon``.
    """
    bounds = [(a, tau * a) for a, tau in intervals]
    count = sum(1 for r in seq.radii if any(lo <= r <= hi for lo, hi in bounds))
    bound = c_l * sum(lambda_hat * math.log(tau) for _, tau in intervals) / epsilon
    return IntervalBoundReport(count, bound, count <= bound)


def estimate_scatter_dimension(m: MetricSpace, epsilon: float, budget: int = DEFAULT_NODE_BUDGET,
                               seed: int = 0) -> int:
    """Largest fixed-radius scattering found over (a sample of) the distinct positive distances."""
    ids = sorted(set(m.points) | set(m.facilities))
    values = np.unique(m.matrix[np.ix_(ids, ids)])
    values = values[values > 0]
    if values.size > MAX_PROBED_RADII:
        values = values[np.linspace(0, values.size - 1, MAX_PROBED_RADII).astype(int)]
    best = 0
    for r in values:
        # just below a realized distance is where separation first holds
        result = longest_scattering(m, epsilon, float(r) / (1 + epsilon) * (1 - 1e-6), budget=budget, seed=seed)
        best = max(best, len(result.sequence))
    return best
