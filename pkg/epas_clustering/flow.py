"""
Min-cost flow by successive shortest paths with node potentials.

Arc costs are nonnegative, so the initial potentials are zero and Dijkstra on reduced costs finds every
augmenting path.
"""
from __future__ import absolute_import, annotations

import heapq
import math
from dataclasses import dataclass

INFINITE_CAPACITY = 10 ** 18


@dataclass
class Arc:
    tail: int
    head: int
    capacity: int
    cost: float
    flow: int = 0

    @property
    def residual(self) -> int:
        return self.capacity - self.flow


@dataclass(frozen=True)
class FlowResult:
    value: int
    cost: float
    flows: tuple[int, ...]

    def flow_on(self, arc: int) -> int:
        return self.flows[arc]


class FlowNetwork:
    def __init__(self):
        self._arcs: list[Arc] = []
        self._adjacency: list[list[int]] = []
        self.source = self.add_node()
        self.sink = self.add_node()

    @property
    def node_count(self) -> int:
        return len(self._adjacency)

    @property
    def arc_count(self) -> int:
        return len(self._arcs) // 2

    def add_node(self) -> int:
        self._adjacency.append([])
        return len(self._adjacency) - 1

    def add_arc(self, tail: int, head: int, capacity: int = INFINITE_CAPACITY, cost: float = 0.0) -> int:
        """Add an arc and its residual twin; returns the public arc index."""
        if capacity < 0 or int(capacity) != capacity:
            raise ValueError(f'Arc capacity must be a nonnegative integer, got {capacity}.')
        if cost < 0:
            raise ValueError(f'Arc cost must be nonnegative, got {cost}.')
        index = len(self._arcs)
        self._arcs.append(Arc(tail, head, int(capacity), float(cost)))
        self._arcs.append(Arc(head, tail, 0, -float(cost)))
        self._adjacency[tail].append(index)
        self._adjacency[head].append(index + 1)
        return index // 2

    def supply(self) -> int:
        return sum(self._arcs[a].capacity for a in self._adjacency[self.source] if a % 2 == 0)

    def _shortest_paths(self, potential: list[float]) -> tuple[list[float], list[int]]:
        n = self.node_count
        dist = [math.inf] * n
        parent = [-1] * n
        dist[self.source] = 0.0
        heap = [(0.0, self.source)]
        while heap:
            d, v = heapq.heappop(heap)
            if d > dist[v]:
                continue
            for a in self._adjacency[v]:
                arc = self._arcs[a]
                if arc.residual <= 0:
                    continue
                # rounding can make reduced costs slightly negative
                reduced = max(0.0, arc.cost + potential[v] - potential[arc.head])
                nd = d + reduced
                if nd < dist[arc.head]:
                    dist[arc.head] = nd
                    parent[arc.head] = a
                    heapq.heappush(heap, (nd, arc.head))
        return dist, parent

    def min_cost_flow(self, demand: int = None) -> FlowResult:
        """Route up to ``demand`` units (default: as much as possible) from source to sink at minimum cost."""
        potential = [0.0] * self.node_count
        value = 0
        target = INFINITE_CAPACITY if demand is None else demand
        while value < target:
            dist, parent = self._shortest_paths(potential)
            if math.isinf(dist[self.sink]):
                break
            for v in range(self.node_count):
                if not math.isinf(dist[v]):
                    potential[v] += dist[v]
            bottleneck = target - value
            v = self.sink
            while v != self.source:
                arc = self._arcs[parent[v]]
                bottleneck = min(bottleneck, arc.residual)
                v = arc.tail
            v = self.sink
            while v != self.source:
                a = parent[v]
                self._arcs[a].flow += bottleneck
                self._arcs[a ^ 1].flow -= bottleneck
                v = self._arcs[a].tail
            value += bottleneck
        forward = self._arcs[0::2]
        cost = math.fsum(arc.flow * arc.cost for arc in forward)
        return FlowResult(value, cost, tuple(arc.flow for arc in forward))


def min_cost_flow(net: FlowNetwork, demand: int = None) -> FlowResult:
    return net.min_cost_flow(demand)
