from __future__ import absolute_import, annotations

from typing import Literal, Tuple, Union, get_args

Coordinate = Tuple[float, ...]
CenterType = Union[int, Coordinate]
CentersType = Tuple[CenterType, ...]
EntryKey = Tuple[int, int]

MetricKindType = Literal['explicit-matrix', 'euclidean', 'graph-shortest-path']
METRIC_KINDS = list(get_args(MetricKindType))

VariantNameType = Literal['vanilla', 'capacitated', 'matroid', 'fault-tolerant', 'fair']
VARIANT_NAMES = list(get_args(VariantNameType))

MatroidKindType = Literal['uniform', 'partition', 'explicit', 'truncated']
MATROID_KINDS = list(get_args(MatroidKindType))

BranchModeType = Literal['deterministic', 'randomized']
BRANCH_MODES = list(get_args(BranchModeType))

GuessModeType = Literal['enumerate', 'provided']
GUESS_MODES = list(get_args(GuessModeType))

CoresetKindType = Literal['identity', 'ring-sampling']
CORESET_KINDS = list(get_args(CoresetKindType))

FamilyType = Literal['euclidean-uniform', 'clustered-gaussian', 'random-metric', 'grid-graph']
FAMILIES = list(get_args(FamilyType))

OutputFormatType = Literal['json', 'csv']
OUTPUT_FORMATS = list(get_args(OutputFormatType))

FEASIBILITY_RTOL = 1e-9
COST_RTOL = 1e-7
WEIGHT_DENOMINATOR = 10 ** 6
DEFAULT_BALL_CONSTANT = 6.0
DOCUMENT_VERSION = 1


def power_distance(d: float, z: float) -> float:
    if d < 0:
        raise ValueError(f'Distance must be nonnegative, got {d}.')
    if z == 1:
        return float(d)
    if z == 2:
        return float(d) * float(d)
    return float(d) ** z


def within_rtol(a: float, b: float, rtol: float = FEASIBILITY_RTOL) -> bool:
    return abs(a - b) <= rtol * max(abs(a), abs(b), 1.0)


def cost_at_most(cost: float, bound: float, rtol: float = COST_RTOL) -> bool:
    return cost <= bound * (1 + rtol)


def is_integral(value: float, tol: float = 1e-9) -> bool:
    return abs(value - round(value)) <= tol * max(1.0, abs(value))


def seconds_to_hms(seconds: float) -> str:
    whole = int(seconds)
    h, r = divmod(whole, 3600)
    m, s = divmod(r, 60)
    return f'{h}h {m:02d}m {s:02d}s'
