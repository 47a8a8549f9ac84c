import itertools

import numpy as np
import pytest

from epas_clustering.exceptions import ContractViolationError
from epas_clustering.matroid import MatroidHandle, is_independent, matroid_intersection, rank, truncate


def _brute_force_common(m1, m2) -> int:
    ground = list(m1.ground)
    for size in range(len(ground), -1, -1):
        for S in itertools.combinations(ground, size):
            if is_independent(m1, S) and is_independent(m2, S):
                return size
    return 0


def _random_partition(rng, ground, parts) -> MatroidHandle:
    labels = rng.integers(parts, size=len(ground))
    blocks = [[e for e, c in zip(ground, labels) if c == part] for part in range(parts)]
    blocks = [b for b in blocks if b]
    return MatroidHandle.partition(blocks, [int(rng.integers(1, 3)) for _ in blocks])


@pytest.mark.parametrize('handle', [MatroidHandle.uniform(range(4), 2),
                                    MatroidHandle.partition([[0, 1], [2, 3]], [1, 1]),
                                    MatroidHandle.explicit(range(4), [[0, 2], [1, 3]])])
def test_empty_set_is_independent(handle):
    """Test that the empty set is independent for every kind."""
    assert is_independent(handle, [])


def test_uniform_rank():
    """Test that a rank-2 uniform matroid rejects three elements."""
    handle = MatroidHandle.uniform(range(5), 2)
    assert not is_independent(handle, [0, 1, 2])
    assert rank(handle) == 2


def test_partition_transversal():
    """Test that one element per part is independent."""
    handle = MatroidHandle.partition([[0, 1], [2, 3]], [1, 1])
    assert is_independent(handle, [0, 3])
    assert not is_independent(handle, [0, 1])


def test_foreign_elements_rejected():
    """Test that elements outside the ground set are a contract violation."""
    with pytest.raises(ContractViolationError):
        is_independent(MatroidHandle.uniform(range(3), 2), [7])


def test_partition_must_cover_disjointly():
    """Test that overlapping parts are rejected."""
    with pytest.raises(ContractViolationError):
        MatroidHandle('partition', (0, 1, 2), parts=(frozenset({0, 1}), frozenset({1, 2})), limits=(1, 1))


def test_truncate_uniform():
    """Test that truncating a uniform matroid behaves like a smaller uniform one."""
    truncated = truncate(MatroidHandle.uniform(range(5), 5), 2)
    for S in itertools.chain.from_iterable(itertools.combinations(range(5), r) for r in range(6)):
        assert is_independent(truncated, S) == (len(S) <= 2)


def test_truncate_partition():
    """Test that a rank-2 truncation drops every three-element transversal."""
    handle = MatroidHandle.partition([[0, 1], [2, 3], [4, 5]], [1, 1, 1])
    truncated = truncate(handle, 2)
    assert is_independent(handle, [0, 2, 4])
    assert not is_independent(truncated, [0, 2, 4])
    assert is_independent(truncated, [0, 2])


def test_intersection_matching():
    """Test bipartite matching on K_{2,2} minus one edge through two partition matroids."""
    # edges (a1,b1)=0, (a1,b2)=1, (a2,b1)=2
    left = MatroidHandle.partition([[0, 1], [2]], [1, 1])
    right = MatroidHandle.partition([[0, 2], [1]], [1, 1])
    common = matroid_intersection(left, right)
    assert len(common) == 2
    assert is_independent(left, common) and is_independent(right, common)


def test_intersection_single_forced():
    """Test limits that force a single common element."""
    m1 = MatroidHandle.partition([[0, 1, 2, 3]], [1])
    m2 = MatroidHandle.uniform([0, 1, 2, 3], 3)
    assert len(matroid_intersection(m1, m2)) == 1


@pytest.mark.parametrize('seed', range(6))
def test_intersection_matches_brute_force(seed):
    """Test the augmenting-path intersection against exhaustive search on small grounds."""
    rng = np.random.default_rng(seed)
    ground = list(range(7))
    m1 = _random_partition(rng, ground, 3)
    m2 = _random_partition(rng, ground, 2)
    assert len(matroid_intersection(m1, m2)) == _brute_force_common(m1, m2)
