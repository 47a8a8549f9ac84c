import itertools

import pytest

from epas_clustering.exceptions import ContractViolationError
from epas_clustering.model import MetricSpace
from epas_clustering.scatter import (ScatteringSequence, ScatterTriple, estimate_scatter_dimension, longest_scattering,
                                     per_radius_class_counts, per_radius_counts, radius_interval_count_bound_check,
                                     validate_scattering)
from tests.conftest import line_metric


def _star(leaves: int) -> MetricSpace:
    """Hub 0 at distance 1 from every leaf, leaves pairwise 2 apart; leaves are the facilities."""
    n = leaves + 1
    matrix = [[0.0 if i == j else (1.0 if 0 in (i, j) else 2.0) for j in range(n)] for i in range(n)]
    return MetricSpace.from_matrix(matrix, points=range(n), facilities=range(1, n))


def _brute_force_longest(m: MetricSpace, epsilon: float, radius: float) -> int:
    pairs = [(x, p) for x in m.facilities for p in m.points if m.distance(x, p) > (1 + epsilon) * radius]
    best = 0

    def extend(seq, used):
        nonlocal best
        best = max(best, len(seq))
        for x, p in pairs:
            if p in used:
                continue
            if all(m.distance(x, q) <= radius for _, q in seq):
                extend(seq + [(x, p)], used | {p})

    extend([], set())
    return best


def test_empty_sequence_is_valid():
    """Test that the empty sequence is a scattering."""
    assert validate_scattering(ScatteringSequence(), 0.5, line_metric([0, 1])) is None


def test_separation_violation():
    """Test that a center within (1 + epsilon) radii of its point breaks separation at index 1."""
    seq = ScatteringSequence((ScatterTriple(0, 1, 1.0),))
    violation = validate_scattering(seq, 0.5, line_metric([0, 1]))
    assert violation.condition == 'separation'
    assert violation.index == 1


def test_valid_line_sequence():
    """Test the hand-checked line sequence x1=0, p1=2, x2=2, p2=5 at radius 1."""
    metric = line_metric([0, 2, 5])
    seq = ScatteringSequence((ScatterTriple(0, 1, 1.0), ScatterTriple(1, 2, 1.0)))
    assert validate_scattering(seq, 0.5, metric) is None


def test_covering_violation():
    """Test that a later center far from an earlier point breaks covering."""
    metric = line_metric([0, 2, 5, 9])
    seq = ScatteringSequence((ScatterTriple(0, 1, 1.0), ScatterTriple(3, 2, 1.0)))
    violation = validate_scattering(seq, 0.5, metric)
    assert (violation.condition, violation.index, violation.later) == ('covering', 1, 2)


def test_prefix_closure():
    """Test that every prefix of a valid sequence is valid."""
    metric = line_metric([0, 2, 5])
    seq = ScatteringSequence((ScatterTriple(0, 1, 1.0), ScatterTriple(1, 2, 1.0)))
    for length in range(len(seq) + 1):
        assert validate_scattering(seq.prefix(length), 0.5, metric) is None


def test_per_radius_counts():
    """Test the radius histogram for shared and distinct radii."""
    shared = ScatteringSequence(tuple(ScatterTriple(0, i, 2.0) for i in range(3)))
    assert per_radius_counts(shared) == {2.0: 3}
    mixed = ScatteringSequence((ScatterTriple(0, 1, 1.0), ScatterTriple(0, 2, 3.0), ScatterTriple(0, 3, 1.0)))
    assert per_radius_counts(mixed) == {1.0: 2, 3.0: 1}


def test_per_radius_class_counts():
    """Test that radii are bucketed into (1 + epsilon) classes."""
    seq = ScatteringSequence((ScatterTriple(0, 1, 1.0), ScatterTriple(0, 2, 1.2), ScatterTriple(0, 3, 2.0)))
    assert per_radius_class_counts(seq, 1.0) == {0: 2, 1: 1}


def test_uniform_metric_has_no_scattering():
    """Test that all-equal distances leave nothing separated at epsilon 0.5."""
    metric = MetricSpace.from_matrix([[0 if i == j else 1 for j in range(4)] for i in range(4)])
    assert len(longest_scattering(metric, 0.5, 1.0).sequence) == 0


def test_star_metric():
    """Test that a star with leaf centers scatters exactly twice at radius 1."""
    result = longest_scattering(_star(4), 0.5, 1.0)
    assert result.exhaustive and not result.partial
    assert len(result.sequence) == 2
    assert validate_scattering(result.sequence, 0.5, _star(4)) is None


@pytest.mark.parametrize('positions', [[0, 1, 2, 3, 4, 5], [0, 1, 3, 6, 10], [0, 2, 3, 7, 8, 13, 14]])
def test_line_matches_brute_force(positions):
    """Test the exhaustive search against a plain enumeration on line metrics."""
    metric = line_metric(positions)
    for radius in (1.0, 2.0, 3.0):
        result = longest_scattering(metric, 0.5, radius)
        assert len(result.sequence) == _brute_force_longest(metric, 0.5, radius)
        assert validate_scattering(result.sequence, 0.5, metric) is None


def test_longest_scattering_rejects_continuous():
    """Test that continuous metrics have no finite search."""
    metric = MetricSpace.from_coordinates([[0.0], [1.0]], continuous=True)
    with pytest.raises(ContractViolationError):
        longest_scattering(metric, 0.5, 1.0)


def test_interval_bound_examples():
    """Test the interval count with no intervals and with one covering interval."""
    seq = ScatteringSequence((ScatterTriple(0, 1, 1.0), ScatterTriple(0, 2, 2.0)))
    empty = radius_interval_count_bound_check(seq, 0.5, [], 1.0)
    assert empty.count == 0 and empty.passed
    covering = radius_interval_count_bound_check(seq, 0.5, [(1.0, 4.0)], 2.0)
    assert covering.count == 2
    assert covering.passed


def test_estimate_scatter_dimension_bounds_solver_sequences():
    """Test that the estimate is positive on a line and at least the brute-force length at each distance."""
    metric = line_metric([0, 1, 3, 6])
    estimate = estimate_scatter_dimension(metric, 0.5)
    assert estimate >= 1
    values = sorted({metric.distance(a, b) for a, b in itertools.combinations(range(4), 2)})
    assert estimate >= max(_brute_force_longest(metric, 0.5, v / 1.5 * (1 - 1e-6)) for v in values)
