import networkx as nx
import numpy as np
import pytest

from epas_clustering.flow import FlowNetwork, min_cost_flow


def test_single_arc():
    """Test a single source to sink arc."""
    net = FlowNetwork()
    net.add_arc(net.source, net.sink, capacity=1, cost=5)
    result = min_cost_flow(net)
    assert result.value == 1
    assert result.cost == 5


def test_parallel_arcs_take_cheapest_first():
    """Test two unit arcs of costs 1 and 3 under demand 2."""
    net = FlowNetwork()
    net.add_arc(net.source, net.sink, capacity=1, cost=1)
    net.add_arc(net.source, net.sink, capacity=1, cost=3)
    result = min_cost_flow(net, demand=2)
    assert result.value == 2
    assert result.cost == 4


def test_demand_above_capacity():
    """Test that the flow stops at the maximum when demand exceeds capacity."""
    net = FlowNetwork()
    middle = net.add_node()
    net.add_arc(net.source, middle, capacity=3)
    net.add_arc(middle, net.sink, capacity=2, cost=1)
    result = min_cost_flow(net, demand=5)
    assert result.value == 2


def test_invalid_arcs():
    """Test that fractional capacities and negative costs are rejected."""
    net = FlowNetwork()
    with pytest.raises(ValueError):
        net.add_arc(net.source, net.sink, capacity=1.5)
    with pytest.raises(ValueError):
        net.add_arc(net.source, net.sink, capacity=1, cost=-1)


@pytest.mark.parametrize('seed', range(5))
def test_matches_networkx_max_flow_min_cost(seed):
    """Test transportation problems against the networkx max-flow min-cost solver."""
    rng = np.random.default_rng(seed)
    supply = rng.integers(1, 4, size=4)
    capacity = rng.integers(1, 5, size=3)
    costs = rng.integers(0, 10, size=(4, 3))
    net = FlowNetwork()
    graph = nx.DiGraph()
    left = [net.add_node() for _ in supply]
    right = [net.add_node() for _ in capacity]
    for i, s in enumerate(supply):
        net.add_arc(net.source, left[i], capacity=int(s))
        graph.add_edge('s', ('l', i), capacity=int(s), weight=0)
        for j in range(len(capacity)):
            net.add_arc(left[i], right[j], capacity=int(s), cost=float(costs[i, j]))
            graph.add_edge(('l', i), ('r', j), capacity=int(s), weight=int(costs[i, j]))
    for j, c in enumerate(capacity):
        net.add_arc(right[j], net.sink, capacity=int(c))
        graph.add_edge(('r', j), 't', capacity=int(c), weight=0)
    result = min_cost_flow(net)
    flow = nx.max_flow_min_cost(graph, 's', 't')
    assert result.value == sum(flow['s'].values())
    assert result.cost == pytest.approx(nx.cost_of_flow(graph, flow))
