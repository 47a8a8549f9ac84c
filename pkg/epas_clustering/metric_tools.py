from __future__ import absolute_import, annotations

import bisect
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import ContractViolationError, DegenerateMetricError
from .model import MetricSpace
from .utilities import FEASIBILITY_RTOL, CenterType


def _locations(m: MetricSpace) -> list[int]:
    if m.continuous:
        return list(m.points)
    return sorted(set(m.points) | set(m.facilities))


def distance_extremes(m: MetricSpace) -> tuple[float, float]:
    """(min positive, max) pairwise distance over the declared locations."""
    ids = _locations(m)
    sub = m.matrix[np.ix_(ids, ids)]
    positive = sub[sub > 0]
    if positive.size == 0:
        raise DegenerateMetricError('All pairwise distances are zero.')
    return float(positive.min()), float(positive.max())


def aspect_ratio(m: MetricSpace) -> float:
    if len(_locations(m)) < 2:
        raise ContractViolationError('Aspect ratio needs at least two locations.')
    low, high = distance_extremes(m)
    return high / low


@dataclass(frozen=True)
class DistanceGrid:
    base: float
    delta: float
    values: tuple[float, ...]

    def bracket(self, v: float) -> float | None:
        """Grid value g with v <= g < v(1 + delta), if the grid reaches that far."""
        i = bisect.bisect_left(self.values, v * (1 - FEASIBILITY_RTOL))
        if i == len(self.values):
            return None
        return self.values[i]


def distance_grid(B: float, delta: float) -> DistanceGrid:
    if not B > 1:
        raise ContractViolationError(f'Grid base must exceed 1, got {B}.')
    if not delta > 0:
        raise ContractViolationError(f'Grid step must be positive, got {delta}.')
    top = int(math.ceil(2 * math.log(B) / math.log1p(delta) - 1e-9))
    ratio = 1 + delta
    return DistanceGrid(B, delta, tuple(ratio ** j for j in range(top + 1)))


def ball_members(m: MetricSpace, center: CenterType, radius: float, universe: Sequence[int]) -> tuple[int, ...]:
    if radius < 0:
        raise ContractViolationError(f'Radius must be nonnegative, got {radius}.')
    if not universe:
        return ()
    d = m.distances_from(center, universe)
    limit = radius * (1 + FEASIBILITY_RTOL)
    return tuple(q for q, dq in zip(universe, d) if dq <= limit)
