import os

import pytest
from dotenv import load_dotenv

from epas_clustering.core import EpasClient
from epas_clustering.model import Capacitated, Fair, FaultTolerant, Instance, MetricSpace

load_dotenv()

test_workers = int(os.environ.get("TEST_EPAS_WORKERS", "1"))


def line_metric(positions, points=None, facilities=None, **kwargs) -> MetricSpace:
    """Euclidean metric of points on a line, one location per position."""
    return MetricSpace.from_coordinates([[float(x)] for x in positions], points, facilities, **kwargs)


@pytest.fixture
def two_cluster_instance():
    """Two tight pairs far apart on a line; every location is both a client and a facility."""
    return Instance(line_metric([0, 1, 10, 11]), k=2, epsilon=0.5, name='two-clusters')


@pytest.fixture
def client():
    """Client with the worker count used across the test run."""
    return EpasClient(workers=test_workers, instance_name='test-client')


@pytest.fixture
def capacitated_instance():
    """Three unit clients and three facilities of capacity 2 on a line."""
    metric = line_metric([0, 1, 2, 0.5, 1.5, 5], points=[0, 1, 2], facilities=[3, 4, 5])
    return Instance(metric, k=2, epsilon=0.5, variant=Capacitated(uniform_capacity=2), name='capacitated')


@pytest.fixture
def fault_tolerant_instance():
    metric = line_metric([0, 1, 9, 10, 0.5, 9.5, 5], points=[0, 1, 2, 3], facilities=[4, 5, 6])
    return Instance(metric, k=2, epsilon=0.5, variant=FaultTolerant(2), name='fault-tolerant')


@pytest.fixture
def fair_instance():
    """Two red and two blue unit clients; both groups must share every cluster equally."""
    metric = line_metric([0, 1, 10, 11, 0.5, 10.5], points=[0, 1, 2, 3], facilities=[4, 5])
    fair = Fair((frozenset({0, 2}), frozenset({1, 3})), (0.5, 0.5), (0.5, 0.5))
    return Instance(metric, k=2, epsilon=0.5, variant=fair, name='fair')
