from __future__ import absolute_import, annotations

from collections import deque
from dataclasses import dataclass
from typing import Hashable, Iterable

from .exceptions import ContractViolationError
from .utilities import MatroidKindType


@dataclass(frozen=True)
class MatroidHandle:
    """
    Independence oracle over a finite ground set.

    ``uniform`` uses ``rank``; ``partition`` uses ``parts`` with matching ``limits``; ``explicit`` lists the
    maximal independent sets in ``bases``; ``truncated`` wraps ``inner`` and caps cardinality at ``rank``.
    """
    kind: MatroidKindType
    ground: tuple[Hashable, ...]
    rank: int | None = None
    parts: tuple[frozenset, ...] = ()
    limits: tuple[int, ...] = ()
    bases: tuple[frozenset, ...] = ()
    inner: MatroidHandle | None = None

    def __post_init__(self):
        object.__setattr__(self, 'ground', tuple(self.ground))
        object.__setattr__(self, 'parts', tuple(frozenset(p) for p in self.parts))
        object.__setattr__(self, 'limits', tuple(int(v) for v in self.limits))
        object.__setattr__(self, 'bases', tuple(frozenset(b) for b in self.bases))
        ground = set(self.ground)
        if self.kind == 'uniform':
            if self.rank is None or self.rank < 0:
                raise ContractViolationError('A uniform matroid needs a nonnegative rank.')
        elif self.kind == 'partition':
            if len(self.parts) != len(self.limits):
                raise ContractViolationError('Partition parts and limits must have equal length.')
            if any(v < 0 for v in self.limits):
                raise ContractViolationError('Partition limits must be nonnegative.')
            covered = [e for p in self.parts for e in p]
            if len(covered) != len(set(covered)) or set(covered) != ground:
                raise ContractViolationError('Partition parts must be disjoint and cover the ground set.')
        elif self.kind == 'explicit':
            if any(not b <= ground for b in self.bases):
                raise ContractViolationError('Explicit bases must be subsets of the ground set.')
        elif self.kind == 'truncated':
            if self.inner is None or self.rank is None or self.rank < 0:
                raise ContractViolationError('A truncated matroid needs an inner handle and a nonnegative rank.')
            if set(self.inner.ground) != ground:
                raise ContractViolationError('Truncation must keep the inner ground set.')
        else:
            raise ContractViolationError(f'Unknown matroid kind \'{self.kind}\'.')

    @classmethod
    def uniform(cls, ground: Iterable[Hashable], rank: int) -> MatroidHandle:
        return cls('uniform', tuple(ground), rank=rank)

    @classmethod
    def partition(cls, parts: Iterable[Iterable[Hashable]], limits: Iterable[int]) -> MatroidHandle:
        parts = tuple(frozenset(p) for p in parts)
        ground = tuple(e for p in parts for e in sorted(p, key=repr))
        return cls('partition', ground, parts=parts, limits=tuple(limits))

    @classmethod
    def explicit(cls, ground: Iterable[Hashable], bases: Iterable[Iterable[Hashable]]) -> MatroidHandle:
        return cls('explicit', tuple(ground), bases=tuple(frozenset(b) for b in bases))


def is_independent(m: MatroidHandle, S: Iterable[Hashable]) -> bool:
    S = set(S)
    foreign = S - set(m.ground)
    if foreign:
        raise ContractViolationError(f'Elements {sorted(foreign, key=repr)} are not in the ground set.')
    if m.kind == 'uniform':
        return len(S) <= m.rank
    if m.kind == 'partition':
        return all(len(S & part) <= limit for part, limit in zip(m.parts, m.limits))
    if m.kind == 'explicit':
        return not S or any(S <= b for b in m.bases)
    return len(S) <= m.rank and is_independent(m.inner, S)


def truncate(m: MatroidHandle, k: int) -> MatroidHandle:
    if k < 0:
        raise ContractViolationError(f'Truncation rank must be nonnegative, got {k}.')
    return MatroidHandle('truncated', m.ground, rank=k, inner=m)


def rank(m: MatroidHandle, S: Iterable[Hashable] = None) -> int:
    """Rank of ``S`` (default: the ground set) by greedy augmentation."""
    independent = set()
    for e in (m.ground if S is None else S):
        if is_independent(m, independent | {e}):
            independent.add(e)
    return len(independent)


def _order(m: MatroidHandle) -> dict[Hashable, int]:
    return {e: i for i, e in enumerate(m.ground)}


def matroid_intersection(m1: MatroidHandle, m2: MatroidHandle) -> set:
    """
    Maximum-cardinality common independent set by shortest augmenting paths in the exchange graph.

    Elements are visited in ground-set order, so the result is deterministic.
    """
    if set(m1.ground) != set(m2.ground):
        raise ContractViolationError('Matroid intersection needs a shared ground set.')
    order = _order(m1)
    ground = sorted(m1.ground, key=order.__getitem__)
    S: set = set()
    while True:
        path = _shortest_augmenting_path(m1, m2, S, ground)
        if path is None:
            return S
        for i, e in enumerate(path):
            # path alternates outside, inside, outside, ...
            if i % 2 == 0:
                S.add(e)
            else:
                S.remove(e)


def _shortest_augmenting_path(m1: MatroidHandle, m2: MatroidHandle, S: set, ground: list) -> list | None:
    outside = [x for x in ground if x not in S]
    inside = [y for y in ground if y in S]
    sources = [x for x in outside if is_independent(m1, S | {x})]
    sinks = {x for x in outside if is_independent(m2, S | {x})}

    def neighbours(v):
        if v in S:
            # y -> x when S - y + x is independent in m1
            return [x for x in outside if is_independent(m1, (S - {v}) | {x})]
        # x -> y when S - y + x is independent in m2
        return [y for y in inside if is_independent(m2, (S - {y}) | {v})]

    parent = {}
    queue = deque()
    for s in sources:
        parent[s] = None
        queue.append(s)
    while queue:
        v = queue.popleft()
        if v in sinks:
            path = [v]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return path[::-1]
        for u in neighbours(v):
            if u not in parent:
                parent[u] = v
                queue.append(u)
    return None
