import itertools

import networkx as nx
import numpy as np
import pytest

from epas_clustering.assignment import (capacitated_assign, coloring_constraint_costs, exact_assign, fair_assign,
                                        fault_tolerant_assign, voronoi_assign)
from epas_clustering.model import (Capacitated, Fair, FaultTolerant, Instance, MetricSpace, WeightedPointSet,
                                   solution_cost, validate_assignment)
from epas_clustering.oracle import brute_force_assignment
from tests.conftest import line_metric


def _unit(points) -> WeightedPointSet:
    return WeightedPointSet(tuple(points), tuple(1.0 for _ in points))


def test_voronoi_single_center():
    """Test that one center takes every point."""
    metric = line_metric([0, 1, 2])
    f = voronoi_assign(metric, _unit([0, 1, 2]), (1,), 1)
    assert {j for (_, j) in f.entries} == {0}


def test_voronoi_ties_go_to_lowest_slot():
    """Test that an equidistant point lands on the lower slot."""
    metric = line_metric([0, -1, 1, 5])
    f = voronoi_assign(metric, _unit([0]), (3, 1, 2), 1)
    assert f.slots_of(0) == {1: 1.0}


def test_voronoi_line_cost():
    """Test nearest-center costs for points 0 and 10 with centers 1 and 9."""
    metric = line_metric([0, 10, 1, 9], points=[0, 1], facilities=[2, 3])
    instance = Instance(metric, k=2)
    Y = instance.point_set()
    f = voronoi_assign(metric, Y, (2, 3), 1)
    assert solution_cost(instance, Y, (2, 3), f) == pytest.approx(2)


def test_capacitated_single_slot():
    """Test that a single large slot takes everything."""
    metric = line_metric([0, 1, 2])
    f = capacitated_assign(metric, _unit([0, 1, 2]), (1,), [5], 1)
    assert f.slot_load(0) == pytest.approx(3)


def test_capacitated_perfect_matching():
    """Test that two unit points and two capacity-one slots are matched at cost zero."""
    metric = MetricSpace.from_matrix([[0, 1], [1, 0]])
    Y = _unit([0, 1])
    f = capacitated_assign(metric, Y, (0, 1), [1, 1], 1)
    assert f.slots_of(0) == {0: 1.0}
    assert f.slots_of(1) == {1: 1.0}


def test_capacitated_over_capacity():
    """Test that three unit points cannot fit in total capacity two."""
    metric = line_metric([0, 1, 2])
    f = capacitated_assign(metric, _unit([0, 1, 2]), (0, 2), [1, 1], 1)
    assert not f
    assert f.tag == 'capacity'


@pytest.mark.parametrize('seed', range(4))
def test_capacitated_matches_brute_force(seed):
    """Test the flow engine against exhaustive integral assignments."""
    rng = np.random.default_rng(seed)
    metric = line_metric(list(rng.permutation(20)[:6]), points=[0, 1, 2, 3], facilities=[4, 5])
    weights = tuple(float(w) for w in rng.integers(1, 3, size=4))
    variant = Capacitated(uniform_capacity=int(np.ceil(sum(weights) / 2)))
    instance = Instance(metric, k=2, weights=weights, variant=variant)
    Y = instance.point_set()
    X = (4, 5)
    flow = exact_assign(instance, Y, X)
    brute = brute_force_assignment(instance, Y, X)
    assert solution_cost(instance, Y, X, flow) == pytest.approx(solution_cost(instance, Y, X, brute))
    assert validate_assignment(instance, Y, X, flow) == []


def test_capacitated_matches_networkx_matching():
    """Test unit capacities against a minimum-weight bipartite matching."""
    rng = np.random.default_rng(11)
    metric = line_metric(list(rng.permutation(30)[:6]), points=[0, 1, 2], facilities=[3, 4, 5])
    Y = _unit([0, 1, 2])
    X = (3, 4, 5)
    f = capacitated_assign(metric, Y, X, [1, 1, 1], 1)
    graph = nx.Graph()
    for p in Y.points:
        for j, x in enumerate(X):
            graph.add_edge(('p', p), ('x', j), weight=metric.distance(p, x))
    matching = nx.bipartite.minimum_weight_full_matching(graph, [('p', p) for p in Y.points])
    expected = sum(metric.distance(p, X[matching[('p', p)][1]]) for p in Y.points)
    cost = sum(w * metric.distance(p, X[j]) for (p, j), w in f.entries.items())
    assert cost == pytest.approx(expected)


def test_fault_tolerant_examples():
    """Test normalized and original cost for distances 1, 3 and 5 with ell = 2."""
    metric = line_metric([0, 1, 3, 5], points=[0], facilities=[1, 2, 3])
    f, normalized, original = fault_tolerant_assign(metric, _unit([0]), (1, 2, 3), 2, 1)
    assert normalized == pytest.approx(2)
    assert original == pytest.approx(4)
    assert f.slots_of(0) == {0: 0.5, 1: 0.5}


def test_fault_tolerant_ell_one_is_voronoi():
    """Test that ell = 1 reproduces the nearest-center assignment."""
    metric = line_metric([0, 4, 9, 1, 8])
    Y = _unit([0, 1, 2])
    f, _, _ = fault_tolerant_assign(metric, Y, (3, 4), 1, 1)
    assert f == voronoi_assign(metric, Y, (3, 4), 1)


def test_fault_tolerant_ell_k_spreads_evenly(fault_tolerant_instance):
    """Test that ell = k sends w/k to every slot."""
    Y = fault_tolerant_instance.point_set()
    f = exact_assign(fault_tolerant_instance, Y, (4, 5))
    assert all(w == pytest.approx(0.5) for w in f.entries.values())
    assert validate_assignment(fault_tolerant_instance, Y, (4, 5), f) == []


def test_fair_unconstrained_equals_voronoi():
    """Test that one group with bounds [0, 1] costs the same as nearest-center assignment."""
    metric = line_metric([0, 1, 10, 11])
    fair = Fair((frozenset({0, 1, 2, 3}),), (0.0,), (1.0,))
    Y = _unit([0, 1, 2, 3])
    instance = Instance(metric, k=2, variant=fair)
    f = fair_assign(metric, Y, (0, 2), fair, 1)
    g = voronoi_assign(metric, Y, (0, 2), 1)
    assert solution_cost(instance, Y, (0, 2), f) == pytest.approx(solution_cost(instance, Y, (0, 2), g))


def test_fair_forced_ratio():
    """Test that a single cluster with half-half bounds needs equal group weights."""
    metric = line_metric([0, 1, 2])
    fair = Fair((frozenset({0}), frozenset({1, 2})), (0.5, 0.5), (0.5, 0.5))
    assert not fair_assign(metric, _unit([0, 1, 2]), (1,), fair, 1)
    assert fair_assign(metric, _unit([0, 1]), (1,), Fair((frozenset({0}), frozenset({1})), (0.5, 0.5),
                                                          (0.5, 0.5)), 1)


def test_fair_balanced_pairing(fair_instance):
    """Test that every cluster gets one red and one blue point at the cheaper pairing."""
    Y = fair_instance.point_set()
    X = (4, 5)
    f = exact_assign(fair_instance, Y, X)
    assert validate_assignment(fair_instance, Y, X, f) == []
    assert solution_cost(fair_instance, Y, X, f) == pytest.approx(2.0)


@pytest.mark.parametrize('seed', range(3))
def test_fair_matches_brute_force(seed):
    """Test the fair engine against exhaustive integral assignments."""
    rng = np.random.default_rng(seed)
    metric = line_metric(list(rng.permutation(25)[:6]), points=[0, 1, 2, 3], facilities=[4, 5])
    fair = Fair((frozenset({0, 1}), frozenset({2, 3})), (0.25, 0.25), (0.75, 0.75))
    instance = Instance(metric, k=2, variant=fair)
    Y = instance.point_set()
    X = (4, 5)
    engine = exact_assign(instance, Y, X)
    brute = brute_force_assignment(instance, Y, X)
    assert bool(engine) == bool(brute)
    if engine:
        assert solution_cost(instance, Y, X, engine) == pytest.approx(solution_cost(instance, Y, X, brute))


def test_coloring_constraint_costs_cover_fair_optimum(fair_instance):
    """Test that the cheapest fair coloring constraint prices the fair optimum."""
    Y = fair_instance.point_set()
    X = (4, 5)
    costs = coloring_constraint_costs(fair_instance.metric, Y, X, fair_instance.variant, 1)
    fair_cost = solution_cost(fair_instance, Y, X, exact_assign(fair_instance, Y, X))
    assert min(costs.values()) <= fair_cost + 1e-9
    balanced = [c for M, c in costs.items() if all(row[0] == row[1] for row in M.matrix)]
    assert min(balanced) == pytest.approx(fair_cost)


def test_engines_always_validate():
    """Test that every engine output passes validation on random small instances."""
    rng = np.random.default_rng(5)
    for trial in range(20):
        metric = line_metric(list(rng.permutation(40)[:7]), points=[0, 1, 2, 3, 4], facilities=[5, 6])
        for variant in (Capacitated(uniform_capacity=3), FaultTolerant(2)):
            instance = Instance(metric, k=2, variant=variant)
            Y = instance.point_set()
            for X in itertools.permutations((5, 6)):
                f = exact_assign(instance, Y, X)
                assert validate_assignment(instance, Y, X, f) == [], trial
