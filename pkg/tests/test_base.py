import pytest

from epas_clustering.base import ClusteringBase


def test_instance_creation_with_default_workers(monkeypatch):
    """Test instance creation reads the worker count from the environment."""
    monkeypatch.setenv('EPAS_WORKERS', '3')
    instance = ClusteringBase()
    assert instance.workers == 3


def test_instance_creation_without_environment(monkeypatch):
    """Test instance creation falls back to a single worker."""
    monkeypatch.delenv('EPAS_WORKERS', raising=False)
    instance = ClusteringBase()
    assert instance.workers == 1


def test_invalid_worker_count():
    """Test instance creation with an unsupported worker count."""
    with pytest.raises(ValueError) as excinfo:
        ClusteringBase(workers=0)
    assert "Worker count '0' not supported." in str(excinfo.value)


def test_workers_property_setter(mocker):
    """Test the workers setter with a mocked logger."""
    warning = mocker.patch('logging.warning')
    instance = ClusteringBase(workers=1)
    instance.workers = 4
    assert instance.workers == 4
    warning.assert_called_once()


def test_instance_names():
    """Test that unnamed instances get distinct generated names and named ones keep theirs."""
    first, second = ClusteringBase(workers=1), ClusteringBase(workers=1)
    assert first.instance_name != second.instance_name
    assert first.instance_name.startswith('Instance_')
    assert ClusteringBase(workers=1, instance_name='named').instance_name == 'named'


def test_progress_prefix():
    """Test that the progress prefix carries the optional description."""
    assert ClusteringBase(workers=1)._progress_prefix('Bench ') == 'Bench '
    assert ClusteringBase(workers=1, progress_bar_desc='run')._progress_prefix('Bench ') == 'run: Bench '
