import json
import math

import pandas as pd
import pytest

from epas_clustering.core import BENCH_COLUMNS, _status, cost_ratio
from epas_clustering.model import Capacitated, Infeasible, Instance
from tests.conftest import line_metric


def test_cost_ratio():
    """Test the ratio against zero and positive references."""
    assert cost_ratio(3.0, 2.0) == pytest.approx(1.5)
    assert cost_ratio(0.0, 0.0) == 1.0
    assert math.isinf(cost_ratio(1.0, 0.0))


def test_solve_and_report(client, two_cluster_instance):
    """Test that the report carries the oracle cost and a gap of at least one."""
    result = client.solve(two_cluster_instance)
    document = json.loads(client.report(two_cluster_instance, result, with_oracle=True))
    assert document['status'] == 'ok'
    assert document['instance'] == 'two-clusters'
    assert document['oracle_cost'] == pytest.approx(2.0)
    assert document['oracle_gap'] >= 1 - 1e-9
    assert 'trace' not in document


def test_solve_overrides(client, two_cluster_instance):
    """Test that keyword overrides reach the solver configuration."""
    result = client.solve(two_cluster_instance, node_budget=1)
    assert result.budget_exhausted
    assert client.config(two_cluster_instance, seed=4).workers == client.workers


def test_report_infeasible(client):
    """Test that an infeasible oracle leaves the oracle fields out."""
    instance = Instance(line_metric([0, 1, 2]), k=2, variant=Capacitated(uniform_capacity=1))
    result = client.solve(instance)
    document = json.loads(client.report(instance, result, with_oracle=True))
    assert document['status'] == 'infeasible'
    assert 'oracle_cost' not in document


def test_revalidate(client, capacitated_instance):
    """Test that the client's own reports revalidate."""
    result = client.solve(capacitated_instance)
    assert client.revalidate(capacitated_instance, client.report(capacitated_instance, result)) == []


def test_audit_identity(client, two_cluster_instance):
    """Test that auditing the identity coreset reports zero error."""
    audit = client.audit(two_cluster_instance, coreset='identity')
    assert audit.max_error == 0


def test_audit_universal(client, fair_instance):
    """Test the universal audit through the client."""
    assert client.audit(fair_instance, coreset='identity', universal=True).max_error == 0


def test_scatter_probe(client):
    """Test one row per distinct positive client-facility distance."""
    instance = Instance(line_metric([0, 1, 3]), k=1)
    df = client.scatter_probe(instance)
    assert list(df.columns) == ['radius', 'length', 'exhaustive', 'partial', 'nodes']
    assert df['radius'].tolist() == [1.0, 2.0, 3.0]
    assert (df['length'] >= 0).all()
    assert df['exhaustive'].all()


def test_bench_is_deterministic(client):
    """Test that every column but wall_time repeats across runs."""
    first = client.bench(3, seed=1, families=['euclidean-uniform', 'random-metric'], variants=['vanilla'])
    second = client.bench(3, seed=1, families=['euclidean-uniform', 'random-metric'], variants=['vanilla'])
    assert list(first.columns) == BENCH_COLUMNS
    assert len(first) == 3
    pd.testing.assert_frame_equal(first.drop(columns=['wall_time']), second.drop(columns=['wall_time']))
    assert first['status'].isin(['ok', 'budget-exhausted']).all()


def test_bench_randomized_skips_constrained(client):
    """Test that randomized branching marks constrained instances unsupported."""
    df = client.bench(2, seed=0, families=['euclidean-uniform'], variants=['capacitated'],
                      branch_mode='randomized')
    assert (df['status'] == 'unsupported').all()


def test_bench_passes_budgets(client):
    """Test that solver budgets given to bench reach every run."""
    df = client.bench(2, seed=0, families=['euclidean-uniform'], variants=['vanilla'], node_budget=1)
    assert df['status'].isin(['ok', 'budget-exhausted']).all()
    assert (df['status'] == 'budget-exhausted').any()


def test_status_names():
    """Test the bench status of every outcome."""
    assert _status(Infeasible('no capacity', 'infeasible-instance')) == 'infeasible'
    assert _status(Infeasible('every guess failed', 'search-exhausted')) == 'search-exhausted'
    assert _status(Infeasible('randomized', 'unsupported')) == 'unsupported'
    assert _status(Infeasible('budgets ran out first', 'budget-exhausted')) == 'budget-exhausted'
