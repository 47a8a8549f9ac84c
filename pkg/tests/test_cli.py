import io
import json
import logging

import pytest

from epas_clustering.cli import (EXIT_AUDIT_FAILED, EXIT_BUDGET, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_OK,
                                 JsonRecordFormatter, configure_logging, main)
from epas_clustering.coreset import CoresetAudit
from epas_clustering.documents import serialize_instance
from epas_clustering.model import Capacitated, Instance
from tests.conftest import line_metric


@pytest.fixture
def instance_path(tmp_path, two_cluster_instance):
    path = tmp_path / 'two-clusters.json'
    path.write_text(serialize_instance(two_cluster_instance))
    return str(path)


def test_generate_then_solve(tmp_path, capsys):
    """Test that a generated document solves with exit code 0."""
    path = str(tmp_path / 'generated.json')
    assert main(['generate', '--family', 'euclidean-uniform', '--n', '5', '--f', '3', '--k', '2', '--seed', '3',
                 '--out', path]) == EXIT_OK
    assert main(['solve', '--instance', path, '--with-oracle']) == EXIT_OK
    document = json.loads(capsys.readouterr().out)
    assert document['status'] == 'ok'
    assert document['oracle_gap'] <= 1 + 30 * 0.5


def test_solve_zero_cost(tmp_path, capsys):
    """Test that clients on facilities are reported at cost zero."""
    path = tmp_path / 'zero.json'
    path.write_text(serialize_instance(Instance(line_metric([0, 5, 9], points=[0, 1], facilities=[0, 1, 2]), k=2)))
    assert main(['solve', '--instance', str(path)]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)['cost'] == 0


def test_over_capacity_exits_infeasible(tmp_path, capsys):
    """Test exit code 2 for an instance whose capacities cannot hold the clients."""
    path = tmp_path / 'tight.json'
    path.write_text(serialize_instance(Instance(line_metric([0, 1, 2]), k=2,
                                                variant=Capacitated(uniform_capacity=1))))
    assert main(['oracle', '--instance', str(path)]) == EXIT_INFEASIBLE
    assert main(['solve', '--instance', str(path)]) == EXIT_INFEASIBLE
    assert json.loads(capsys.readouterr().out.splitlines()[-1])['status'] == 'infeasible'


def test_node_budget_exit(instance_path, capsys):
    """Test exit code 3 when the node budget runs out."""
    assert main(['solve', '--instance', instance_path, '--node-budget', '1']) == EXIT_BUDGET
    assert json.loads(capsys.readouterr().out)['status'] == 'budget-exhausted'


@pytest.mark.parametrize('argv', [['solve'], ['transport', '--instance', 'x'], ['solve', '--instance', 'x',
                                                                                '--mode', 'quantum']])
def test_usage_errors(argv):
    """Test that malformed command lines exit with code 1."""
    assert main(argv) == EXIT_ERROR


def test_missing_file_and_bad_variant(instance_path, tmp_path):
    """Test that unreadable input and invalid variant blocks exit with code 1."""
    assert main(['solve', '--instance', str(tmp_path / 'absent.json')]) == EXIT_ERROR
    assert main(['solve', '--instance', instance_path, '--variant', 'fault-tolerant']) == EXIT_ERROR
    assert main(['solve', '--instance', instance_path, '--variant', '{"name": ']) == EXIT_ERROR


def test_variant_and_epsilon_overrides(instance_path, capsys):
    """Test that the variant block and epsilon replace the document's own."""
    argv = ['solve', '--instance', instance_path, '--variant', '{"name": "fault-tolerant", "ell": 2}',
            '--epsilon', '0.25']
    assert main(argv) == EXIT_OK
    document = json.loads(capsys.readouterr().out)
    assert 'original_cost' in document['metadata']


def test_solve_csv_and_trace(instance_path, tmp_path, capsys):
    """Test the assignment table and the JSON-lines trace file."""
    trace = tmp_path / 'trace.jsonl'
    assert main(['solve', '--instance', instance_path, '--format', 'csv', '--trace', str(trace)]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == 'point,slot,weight'
    assert len(lines) == 5
    records = [json.loads(line) for line in trace.read_text().splitlines()]
    assert records and 'depth' in records[0]


def test_audit_coreset(instance_path, capsys):
    """Test the audit summary for the identity coreset."""
    assert main(['audit-coreset', '--instance', instance_path, '--coreset', 'identity']) == EXIT_OK
    row = json.loads(capsys.readouterr().out)
    assert row['max_error'] == 0 and row['passed']


def test_scatter_probe_csv(instance_path, capsys):
    """Test the scatter probe table."""
    assert main(['scatter-probe', '--instance', instance_path, '--format', 'csv']) == EXIT_OK
    assert capsys.readouterr().out.startswith('radius,length,exhaustive,partial,nodes')


def test_bench_csv_is_deterministic(tmp_path):
    """Test that two bench runs with one seed write identical tables without wall time."""
    outputs = []
    for name in ('first.csv', 'second.csv'):
        path = tmp_path / name
        assert main(['bench', '--size', '2', '--seed', '4', '--epsilon', '0.5', '--family', 'euclidean-uniform',
                     '--variant', 'vanilla', '--format', 'csv', '--out', str(path), '--workers', '1']) == EXIT_OK
        outputs.append(path.read_text())
    assert outputs[0] == outputs[1]
    assert 'wall_time' not in outputs[0].splitlines()[0]


def test_json_log_records():
    """Test that log records are written as one JSON object per line."""
    stream = io.StringIO()
    configure_logging(stream)
    logging.warning('probe %s', 7)
    entry = json.loads(stream.getvalue().splitlines()[-1])
    assert entry['level'] == 'WARNING'
    assert entry['message'] == 'probe 7'
    assert isinstance(JsonRecordFormatter().format(logging.makeLogRecord({'msg': 'x'})), str)


def test_failed_audit_exit(instance_path, mocker, capsys):
    """Test that an audit error above epsilon exits with its own code."""
    mocker.patch('epas_clustering.core.EpasClient.audit', return_value=CoresetAudit(0.9, 4, True))
    assert main(['audit-coreset', '--instance', instance_path]) == EXIT_AUDIT_FAILED
    assert not json.loads(capsys.readouterr().out)['passed']


def test_bench_budget_flags(tmp_path):
    """Test that bench accepts the search budgets and exits with code 3 when one runs out."""
    path = tmp_path / 'bench.csv'
    argv = ['bench', '--size', '2', '--seed', '1', '--epsilon', '0.5', '--family', 'euclidean-uniform',
            '--variant', 'vanilla', '--format', 'csv', '--out', str(path), '--node-budget', '1', '--depth-cap', '2',
            '--leader-budget', '5']
    assert main(argv) == EXIT_BUDGET
    assert 'budget-exhausted' in path.read_text()


def test_search_exhaustion_exit(instance_path, mocker, capsys):
    """Test that a search ending without a budget hit exits as infeasible."""
    mocker.patch('epas_clustering.solver.lp_lower_bound', return_value=0.0)
    assert main(['solve', '--instance', instance_path, '--guess', '0.01', '--depth-cap', '100']) == EXIT_INFEASIBLE
    document = json.loads(capsys.readouterr().out)
    assert document['status'] == 'infeasible'
    assert document['tag'] == 'search-exhausted'
