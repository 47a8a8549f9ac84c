import itertools

import numpy as np
import pytest

from epas_clustering.assignment import exact_assign
from epas_clustering.exceptions import ContractViolationError, ResourceLimitError
from epas_clustering.matroid import MatroidHandle
from epas_clustering.model import (Capacitated, Instance, Matroid, MetricSpace, WeightedPointSet, solution_cost,
                                   validate_assignment)
from epas_clustering.oracle import brute_force_assignment, brute_force_opt
from tests.conftest import line_metric


def test_one_median_on_a_line():
    """Test that the middle of {0, 1, 2} is the 1-median with cost 2."""
    result = brute_force_opt(Instance(line_metric([0, 1, 2]), k=1))
    assert result.centers == (1,)
    assert result.cost == pytest.approx(2)


def test_k_equals_facilities():
    """Test that k = |F| examines a single center set."""
    result = brute_force_opt(Instance(line_metric([0, 1, 5], facilities=[0, 2]), k=2))
    assert result.centers == (0, 2)
    assert result.metadata['examined'] == 1


def test_over_capacity_is_infeasible():
    """Test that total capacity below total weight has no solution."""
    instance = Instance(line_metric([0, 1, 2]), k=2, variant=Capacitated(uniform_capacity=1))
    result = brute_force_opt(instance)
    assert not result


def test_matroid_skips_dependent_sets(two_cluster_instance):
    """Test that only independent center sets are considered."""
    handle = MatroidHandle.partition([[0, 2], [1, 3]], [1, 1])
    result = brute_force_opt(two_cluster_instance.replace(variant=Matroid(handle)))
    assert result.metadata['examined'] == 4
    assert set(result.centers) in ({0, 3}, {1, 2})


def test_oracle_limit():
    """Test that too many center sets raise a resource error."""
    with pytest.raises(ResourceLimitError):
        brute_force_opt(Instance(line_metric(range(10)), k=3), limit=10)


def test_continuous_metric_rejected():
    """Test that the exhaustive oracle needs finite facilities."""
    metric = MetricSpace.from_coordinates([[0.0], [1.0]], continuous=True)
    with pytest.raises(ContractViolationError):
        brute_force_opt(Instance(metric, k=1))


def test_forced_assignment():
    """Test one point and one slot."""
    instance = Instance(line_metric([0, 3]), k=1)
    f = brute_force_assignment(instance, WeightedPointSet((0,), (1.0,)), (1,))
    assert f.slots_of(0) == {0: 1.0}


def test_assignment_limits():
    """Test that heavy or fractional inputs are refused."""
    instance = Instance(line_metric([0, 3]), k=1)
    with pytest.raises(ResourceLimitError):
        brute_force_assignment(instance, WeightedPointSet((0,), (11.0,)), (1,))
    with pytest.raises(ContractViolationError):
        brute_force_assignment(instance, WeightedPointSet((0,), (0.5,)), (1,))


@pytest.mark.parametrize('seed', range(4))
def test_oracle_is_a_lower_bound(seed):
    """Test that no center set beats the oracle optimum."""
    rng = np.random.default_rng(seed)
    metric = line_metric(list(rng.permutation(30)[:6]), points=[0, 1, 2, 3], facilities=[3, 4, 5])
    instance = Instance(metric, k=2, variant=Capacitated(uniform_capacity=3))
    best = brute_force_opt(instance)
    Y = instance.point_set()
    for X in itertools.permutations(metric.facilities, 2):
        f = exact_assign(instance, Y, X)
        if f:
            assert validate_assignment(instance, Y, X, f) == []
            assert solution_cost(instance, Y, X, f) >= best.cost - 1e-9
