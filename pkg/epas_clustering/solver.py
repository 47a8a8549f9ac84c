from __future__ import absolute_import, annotations

import heapq
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Any, Iterator, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

from .assignment import exact_assign
from .ballint import Request, RequestSet, euclidean_ball_int, filter_candidates, gen_ball_int, select_centers
from .coreset import DEFAULT_SAMPLE_CONSTANT, identity_coreset, ring_sampling_coreset
from .exceptions import (ContractViolationError, DegenerateMetricError, DegenerateSamplingError,
                         InfeasibleInstanceError, PremiseError, UnsupportedVariantError)
from .matroid import is_independent
from .metric_tools import DistanceGrid, ball_members, distance_extremes, distance_grid
from .model import (Assignment, Capacitated, FaultTolerant, Infeasible, Instance, Matroid, MetricSpace, Solution,
                    Vanilla, WeightedPointSet, pairwise_cost_matrix, solution_cost)
from .scatter import ScatteringSequence, ScatterTriple, estimate_scatter_dimension, validate_scattering
from .utilities import (BRANCH_MODES, CORESET_KINDS, DEFAULT_BALL_CONSTANT, FEASIBILITY_RTOL, GUESS_MODES,
                        WEIGHT_DENOMINATOR, BranchModeType, CentersType, CoresetKindType, GuessModeType,
                        cost_at_most)

DEFAULT_LEADER_BUDGET = 100_000
DEFAULT_NODE_BUDGET = 200_000
DEFAULT_RANDOM_TRIALS = 16
DEPTH_CONSTANT = 20
SCATTER_ESTIMATE_BUDGET = 2_000
LP_VARIABLE_LIMIT = 4_000
LP_RTOL = 1e-6
LP_ATOL = 1e-9
SEARCH_BUDGETS = frozenset({'node-budget', 'leader-budget', 'depth'})
DUPLICATE_OFFSET = 1e-9
# continuous optima may sit between two clients, below the smallest client distance
CONTINUOUS_UNIT_DIVISOR = 4.0


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 0.5
    ball_constant_c: float = DEFAULT_BALL_CONSTANT
    eta: float | None = None
    depth_cap: int | None = None
    branch_mode: BranchModeType = 'deterministic'
    guess_mode: GuessModeType = 'enumerate'
    guess: float | None = None
    leader_budget: int = DEFAULT_LEADER_BUDGET
    node_budget: int = DEFAULT_NODE_BUDGET
    seed: int = 0
    color_retries: int | None = None
    coreset: CoresetKindType = 'identity'
    coreset_constant: float = DEFAULT_SAMPLE_CONSTANT
    random_trials: int = DEFAULT_RANDOM_TRIALS
    scatter_dimension: float | None = None
    workers: int = 1
    trace: bool = False
    scale_epsilon_by_z: bool = False

    def __post_init__(self):
        if not 0 < self.epsilon <= 0.5:
            raise ContractViolationError(f'epsilon must lie in (0, 1/2], got {self.epsilon}.')
        if not self.ball_constant_c > 0:
            raise ContractViolationError(f'Ball constant must be positive, got {self.ball_constant_c}.')
        if self.eta is not None and not 0 < self.eta < self.epsilon:
            raise ContractViolationError(f'eta must lie in (0, epsilon), got {self.eta}.')
        if self.depth_cap is not None and (not isinstance(self.depth_cap, int) or self.depth_cap < 1):
            raise ContractViolationError(f'depth_cap must be a positive integer, got {self.depth_cap}.')
        if self.branch_mode not in BRANCH_MODES:
            raise ContractViolationError(f'Branch mode \'{self.branch_mode}\' not supported. Use one of {BRANCH_MODES}.')
        if self.guess_mode not in GUESS_MODES:
            raise ContractViolationError(f'Guess mode \'{self.guess_mode}\' not supported. Use one of {GUESS_MODES}.')
        if self.guess_mode == 'provided' and (self.guess is None or not 0 <= self.guess < math.inf):
            raise ContractViolationError('A provided guess must be a finite nonnegative number.')
        if self.coreset not in CORESET_KINDS:
            raise ContractViolationError(f'Coreset \'{self.coreset}\' not supported. Use one of {CORESET_KINDS}.')
        for name in ('leader_budget', 'node_budget', 'random_trials', 'workers'):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ContractViolationError(f'{name} must be a positive integer, got {value}.')
        if self.color_retries is not None and self.color_retries < 1:
            raise ContractViolationError(f'color_retries must be positive, got {self.color_retries}.')
        if self.scatter_dimension is not None and not self.scatter_dimension > 0:
            raise ContractViolationError(f'scatter_dimension must be positive, got {self.scatter_dimension}.')
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ContractViolationError(f'seed must be a nonnegative integer, got {self.seed}.')

    @classmethod
    def for_instance(cls, instance: Instance, **overrides) -> SolverConfig:
        return cls(**{'epsilon': instance.epsilon, **overrides})

    def effective_epsilon(self, z: float) -> float:
        return self.epsilon / z if self.scale_epsilon_by_z else self.epsilon

    def slack(self, z: float) -> float:
        epsilon = self.effective_epsilon(z)
        eta = epsilon / 2 if self.eta is None else self.eta
        if not eta < epsilon:
            raise ContractViolationError(f'eta {eta} must stay below the working epsilon {epsilon}.')
        return eta

    def retries(self, k: int) -> int:
        return self.color_retries if self.color_retries is not None else int(math.ceil(3 * math.e ** k))


@dataclass(frozen=True)
class SearchState:
    requests: tuple[RequestSet, ...]
    radii: tuple[float, ...]
    balls: tuple[tuple[int, ...], ...]
    depth: int = 0

    def __post_init__(self):
        if not len(self.requests) == len(self.radii) == len(self.balls):
            raise ContractViolationError('Requests, radii and balls must cover the same slots.')


@dataclass(frozen=True)
class RootGuess:
    leaders: tuple[int, ...]
    radii: tuple[float, ...]
    balls: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class TraceRecord:
    guess: float
    coloring: int
    root: int
    depth: int
    slot: int | None
    point: int | None
    radius: float | None
    cost: float | None


@dataclass(frozen=True)
class WitnessCheck:
    point: int
    slot: int
    assigned: bool
    unhappy: bool
    outside: bool
    near_leader: bool

    @property
    def holds(self) -> bool:
        return self.assigned and self.unhappy and self.outside and self.near_leader


@dataclass(frozen=True)
class PathStep:
    depth: int
    centers: CentersType
    cost: float
    slot: int | None = None
    request: Request | None = None


@dataclass(frozen=True)
class WitnessPath:
    root: RootGuess
    steps: tuple[PathStep, ...]
    requests: tuple[RequestSet, ...]
    sequences: tuple[ScatteringSequence, ...]
    succeeded: bool
    problems: tuple[str, ...] = ()


@dataclass(frozen=True)
class MassCheck:
    ratio: float
    contained: bool
    passed: bool


def radius_grid(m: MetricSpace, epsilon: float) -> tuple[float, float, DistanceGrid]:
    try:
        low, high = distance_extremes(m)
    except DegenerateMetricError:
        low, high = 1.0, 1.0
    if m.continuous:
        low /= CONTINUOUS_UNIT_DIVISOR
    return low, high, distance_grid(max(high / low, 1 + epsilon), epsilon)


def bracket_radius(unit: float, grid: DistanceGrid, d: float) -> float | None:
    """Grid radius r with d <= r < (1 + delta) d; a zero distance maps to the smallest radius."""
    if d <= 0:
        return unit * grid.values[0]
    g = grid.bracket(d / unit)
    return None if g is None else unit * g


def color_code(F: Sequence[int], k: int, seed: int | Sequence[int]) -> tuple[tuple[int, ...], ...]:
    """Color every facility uniformly at random with one of k colors; class i holds the facilities of color i."""
    if k < 1:
        raise ContractViolationError(f'k must be positive, got {k}.')
    rng = np.random.default_rng(seed)
    colors = rng.integers(k, size=len(F)) if k > 1 else np.zeros(len(F), dtype=int)
    return tuple(tuple(f for f, c in zip(F, colors) if c == i) for i in range(k))


def _uses_coloring(instance: Instance) -> bool:
    return not instance.metric.continuous and isinstance(instance.variant, (Capacitated, Matroid, FaultTolerant))


def _location_count(m: MetricSpace, Y: WeightedPointSet) -> int:
    d = m.distances(Y.points, Y.points)
    return sum(1 for i in range(len(Y)) if not np.any(d[i, :i] == 0))


def _greedy_centers(instance: Instance, Y: WeightedPointSet) -> CentersType:
    metric, variant = instance.metric, instance.variant
    if metric.continuous:
        candidates = [tuple(float(v) for v in metric.coordinates[p]) for p in Y.points]
    else:
        candidates = list(metric.facilities)
    unit = np.power(metric.distances(Y.points, candidates), instance.z)
    weights = np.array(Y.weights)
    handle = variant.handle if isinstance(variant, Matroid) else None
    chosen: list[int] = []
    current = np.full(len(Y), np.inf)
    for _ in range(instance.k):
        best = None
        for j, c in enumerate(candidates):
            if not metric.continuous and j in chosen:
                continue
            if handle is not None and not is_independent(handle, [candidates[i] for i in chosen] + [c]):
                continue
            value = float(np.dot(weights, np.minimum(current, unit[:, j])))
            if best is None or value < best[0]:
                best = (value, j)
        if best is None:
            raise InfeasibleInstanceError(f'only {len(chosen)} independent facilities exist, {instance.k} are required')
        chosen.append(best[1])
        current = np.minimum(current, unit[:, best[1]])
    return tuple(candidates[j] for j in chosen)


def _upper_bound(instance: Instance, Y: WeightedPointSet) -> float:
    X = _greedy_centers(instance, Y)
    f = exact_assign(instance, Y, X)
    variant = instance.variant
    if not f and isinstance(variant, Capacitated) and not instance.metric.continuous:
        X = tuple(sorted(instance.metric.facilities, key=lambda c: (-variant.capacity(c), c))[:instance.k])
        f = exact_assign(instance, Y, X)
    if not f:
        raise InfeasibleInstanceError(f.reason)
    return solution_cost(instance, Y, X, f)


def _nearest_bound(instance: Instance, Y: WeightedPointSet) -> float:
    metric = instance.metric
    if metric.continuous:
        return 0.0
    unit = np.sort(np.power(metric.distances(Y.points, metric.facilities), instance.z), axis=1)
    if isinstance(instance.variant, FaultTolerant):
        per_point = unit[:, :instance.variant.ell].mean(axis=1)
    else:
        per_point = unit[:, 0]
    return float(np.dot(np.array(Y.weights), per_point))


def _smallest_positive_cost(instance: Instance, Y: WeightedPointSet) -> float:
    metric = instance.metric
    weights = np.array(Y.weights)
    if metric.continuous:
        d = metric.distances(Y.points, Y.points)
        positive = d[d > 0]
        if not positive.size:
            return 0.0
        value = float(weights.min()) * (float(positive.min()) / 2) ** instance.z
    else:
        d = metric.distances(Y.points, metric.facilities)
        values = [w * float(row[row > 0].min()) ** instance.z for w, row in zip(weights, d) if np.any(row > 0)]
        if not values:
            return 0.0
        value = min(values)
    if isinstance(instance.variant, Capacitated):
        value /= WEIGHT_DENOMINATOR
    if isinstance(instance.variant, FaultTolerant):
        value /= instance.variant.ell
    return value


def _zero_cost_possible(instance: Instance, Y: WeightedPointSet) -> bool:
    metric = instance.metric
    if not metric.continuous and np.any(metric.distances(Y.points, metric.facilities).min(axis=1) > 0):
        return False
    return _location_count(metric, Y) <= instance.k


def guess_opt_values(instance: Instance, coreset: WeightedPointSet, epsilon: float) -> list[float]:
    """
    Ascending guesses for the optimum cost on ``coreset``.

    The lower end is the cost of serving every point by its nearest facilities (or, when that is zero, the
    cheapest positive single-point cost); the upper end is the cost of a greedy feasible solution. Successive
    guesses grow by a factor (1 + epsilon), so one of them lies in [OPT, (1 + epsilon) OPT]. Zero leads the list
    when a zero-cost solution may exist.
    """
    if not len(coreset):
        raise ContractViolationError('The coreset is empty.')
    if not epsilon > 0:
        raise ContractViolationError(f'epsilon must be positive, got {epsilon}.')
    upper = _upper_bound(instance, coreset)
    if upper == 0:
        return [0.0]
    lower = _nearest_bound(instance, coreset)
    if lower == 0:
        lower = _smallest_positive_cost(instance, coreset) or upper
    values = [0.0] if _zero_cost_possible(instance, coreset) else []
    j = 0
    while True:
        g = lower * (1 + epsilon) ** j
        values.append(g)
        if g >= upper:
            return values
        j += 1


def lp_lower_bound(instance: Instance, Y: WeightedPointSet, limit: int = LP_VARIABLE_LIMIT) -> float:
    """Fractional facility-opening relaxation on (Y, w); 0 for continuous metrics or oversized programs."""
    metric = instance.metric
    if metric.continuous or not len(Y):
        return 0.0
    F = list(metric.facilities)
    n, m = len(Y), len(F)
    if n * m + m > limit:
        return 0.0
    variant = instance.variant
    ell = variant.ell if isinstance(variant, FaultTolerant) else 1
    weights = np.array(Y.weights)
    unit = pairwise_cost_matrix(instance, Y, F)
    c = np.concatenate([(weights[:, None] / ell * unit).ravel(), np.zeros(m)])
    x = np.arange(n * m)
    opening = n * m + np.tile(np.arange(m), n)
    rows = [np.repeat(x, 2)]
    cols = [np.column_stack([x, opening]).ravel()]
    vals = [np.tile([1.0, -1.0], n * m)]
    rows.append(np.full(m, n * m))
    cols.append(n * m + np.arange(m))
    vals.append(np.ones(m))
    b_ub = [0.0] * (n * m) + [float(instance.k)]
    if isinstance(variant, Capacitated):
        for j, f in enumerate(F):
            r = len(b_ub)
            rows.append(np.full(n + 1, r))
            cols.append(np.append(np.arange(n) * m + j, n * m + j))
            vals.append(np.append(weights, -float(variant.capacity(f))))
            b_ub.append(0.0)
    A_ub = coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(len(b_ub), n * m + m))
    A_eq = coo_matrix((np.ones(n * m), (np.repeat(np.arange(n), m), x)), shape=(n, n * m + m))
    result = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=np.full(n, float(ell)), bounds=(0, 1),
                     method='highs')
    if result.status != 0:
        logging.warning('LP lower bound unavailable: %s', result.message)
        return 0.0
    return max(0.0, float(result.fun) * (1 - LP_RTOL))


def default_depth_cap(instance: Instance, epsilon: float, scatter_dimension: float = None) -> int:
    metric = instance.metric
    if scatter_dimension is None:
        if metric.continuous:
            scatter_dimension = 2 ** metric.dimension
        else:
            scatter_dimension = max(1, estimate_scatter_dimension(metric, epsilon / 2,
                                                                  budget=SCATTER_ESTIMATE_BUDGET))
    return max(1, int(math.ceil(DEPTH_CONSTANT * instance.k * math.log(1 / epsilon) / epsilon * scatter_dimension)))


def sample_unhappy(m: MetricSpace, Y: WeightedPointSet, X: CentersType, balls: Sequence[Sequence[int]], z: float,
                   seed: int | np.random.Generator = None) -> tuple[int, int]:
    """
    Draw a point of the union of ``balls`` with probability proportional to w(p) d(p, X)^z, then one of the
    balls holding it uniformly.
    """
    ballsets = [frozenset(b) for b in balls]
    members = [i for i, p in enumerate(Y.points) if any(p in b for b in ballsets)]
    if not members:
        raise DegenerateSamplingError('The balls hold no point of the coreset.')
    rows = [Y.points[i] for i in members]
    nearest = m.distances(rows, list(X)).min(axis=1)
    mass = np.array([Y.weights[i] for i in members]) * np.power(nearest, z)
    total = mass.sum()
    if not total > 0:
        raise DegenerateSamplingError('Every point in the balls is already served at distance zero.')
    rng = np.random.default_rng(seed)
    p = rows[int(rng.choice(len(rows), p=mass / total))]
    slots = [i for i, b in enumerate(ballsets) if p in b]
    return p, slots[int(rng.integers(len(slots)))]


def perturb_duplicates(X: CentersType, offset: float) -> CentersType:
    """Shift repeated coordinate centers apart along the first axis; facility ids are left alone."""
    seen: dict[tuple, int] = {}
    out = []
    for x in X:
        if not isinstance(x, tuple):
            out.append(x)
            continue
        count = seen.get(x, 0)
        seen[x] = count + 1
        out.append(x if count == 0 else (x[0] + count * offset,) + tuple(x[1:]))
    return tuple(out)


class _BudgetExhausted(Exception):
    pass


class _Cancelled(Exception):
    pass


@dataclass(frozen=True)
class _Option:
    radius: float
    leader: int
    ball: tuple[int, ...]
    start: Any


@dataclass(frozen=True)
class _Root:
    leaders: tuple[int, ...]
    radii: tuple[float, ...]
    balls: tuple[tuple[int, ...], ...]
    state: tuple


@dataclass(frozen=True)
class _Evaluation:
    centers: CentersType | None
    cost: float = math.inf
    distances: np.ndarray | None = None
    mass: np.ndarray | None = None


@dataclass(frozen=True)
class _Hit:
    centers: CentersType
    cost: float
    coloring: int
    root: int


@dataclass(frozen=True)
class _RootMemo:
    records: tuple[tuple[float, CentersType], ...]


class _SearchContext:
    def __init__(self, instance: Instance, Y: WeightedPointSet, config: SolverConfig):
        self.instance = instance
        self.metric = instance.metric
        self.Y = Y
        self.config = config
        self.epsilon = config.effective_epsilon(instance.z)
        self.eta = config.slack(instance.z)
        self.c = config.ball_constant_c
        self.rows = {p: i for i, p in enumerate(Y.points)}
        self.weights = np.array(Y.weights)
        self.unit, self.largest, self.grid = radius_grid(instance.metric, self.epsilon)
        self.depth_cap = config.depth_cap or default_depth_cap(instance, self.epsilon, config.scatter_dimension)
        self.nodes = 0
        self.flags: set[str] = set()
        self.best: tuple[float, CentersType] | None = None
        self.trace: list[TraceRecord] | None = [] if config.trace else None
        self.cancelled = threading.Event()
        self._lock = threading.Lock()

    @property
    def continuous_radii(self) -> list[float]:
        out = []
        for g in self.grid.values:
            out.append(self.unit * g)
            if self.unit * g >= self.largest:
                break
        return out

    def flag(self, name: str):
        with self._lock:
            self.flags.add(name)

    def visit(self, node: _Evaluation, record: TraceRecord):
        with self._lock:
            if self.cancelled.is_set():
                raise _Cancelled()
            self.nodes += 1
            if self.nodes > self.config.node_budget:
                raise _BudgetExhausted()
            if node.centers is not None and (self.best is None or node.cost < self.best[0]):
                self.best = (node.cost, node.centers)
            if self.trace is not None:
                self.trace.append(record)
        logging.debug('Node %s at depth %s of root %s costs %s.', self.nodes, record.depth, record.root, record.cost)

    def run(self, searches: Sequence[_Search], G: float) -> _Hit | None:
        if self.config.workers == 1 or len(searches) == 1:
            for search in searches:
                hit = search.solve(G)
                if hit:
                    return hit
            return None
        self.cancelled.clear()
        pool = ThreadPoolExecutor(max_workers=self.config.workers)
        futures = [pool.submit(self._solve_until_cancelled, search, G) for search in searches]
        try:
            for future in futures:
                hit = future.result()
                if hit:
                    logging.debug('Coloring %s succeeded; cancelling %s outstanding searches.', hit.coloring,
                                  sum(not f.done() for f in futures))
                    return hit
            return None
        finally:
            # running searches stop at their next visit, queued ones never start
            self.cancelled.set()
            pool.shutdown(wait=True, cancel_futures=True)

    @staticmethod
    def _solve_until_cancelled(search: _Search, G: float) -> _Hit | None:
        try:
            return search.solve(G)
        except _Cancelled:
            return None


class _Search:
    def __init__(self, context: _SearchContext, colors: Sequence[Sequence[int]], index: int, symmetric: bool):
        self.ctx = context
        self.colors = tuple(tuple(c) for c in colors)
        self.index = index
        self.symmetric = symmetric
        self._nodes: dict[tuple, _Evaluation] = {}
        self._slot_centers: dict[RequestSet, tuple] = {}
        self._memo: dict[int, _RootMemo] = {}
        self._roots: list[_Root] = []
        self._pending = self._enumerate_roots()
        self._exhausted = False

    def _slot_options(self, i: int) -> list[_Option]:
        ctx = self.ctx
        metric = ctx.metric
        options: dict[Any, _Option] = {}
        for p in ctx.Y.points:
            if metric.continuous:
                radii = ctx.continuous_radii
            else:
                found = {bracket_radius(ctx.unit, ctx.grid, float(d)) for d in metric.distances_from(p, self.colors[i])}
                radii = sorted(r for r in found if r is not None)
            for r in radii:
                ball = ball_members(metric, p, ctx.c * r / ctx.epsilon, ctx.Y.points)
                if metric.continuous:
                    key, start = (p, r), RequestSet((Request(p, r),))
                else:
                    start = filter_candidates(metric, self.colors[i], [Request(p, r)], ctx.eta)
                    if not start:
                        continue
                    # same candidates and ball: the smallest radius branches on a superset of points
                    key = (start, ball)
                if key not in options or r < options[key].radius:
                    options[key] = _Option(r, p, ball, start)
        return sorted(options.values(), key=lambda o: (o.radius, ctx.rows[o.leader]))

    def _enumerate_roots(self) -> Iterator[_Root]:
        k = self.ctx.instance.k
        if self.symmetric:
            shared = self._slot_options(0)
            options = [shared] * k
        else:
            options = [self._slot_options(i) for i in range(k)]
        if any(not o for o in options):
            return

        def priority(idx):
            return math.fsum(options[j][idx[j]].radius for j in range(k)), idx

        start = (0,) * k
        heap = [priority(start)]
        seen = {start}
        while heap:
            _, idx = heapq.heappop(heap)
            chosen = [options[j][idx[j]] for j in range(k)]
            yield _Root(tuple(o.leader for o in chosen), tuple(o.radius for o in chosen),
                        tuple(o.ball for o in chosen), tuple(o.start for o in chosen))
            for j in range(k):
                nxt = idx[:j] + (idx[j] + 1,) + idx[j + 1:]
                if nxt[j] >= len(options[j]) or nxt in seen:
                    continue
                if self.symmetric and j + 1 < k and nxt[j] > nxt[j + 1]:
                    continue
                seen.add(nxt)
                heapq.heappush(heap, priority(nxt))

    def _root(self, i: int) -> _Root | None:
        while len(self._roots) <= i and not self._exhausted:
            try:
                self._roots.append(next(self._pending))
            except StopIteration:
                self._exhausted = True
        return self._roots[i] if i < len(self._roots) else None

    def _slot_center(self, Q: RequestSet) -> tuple:
        if Q not in self._slot_centers:
            metric = self.ctx.metric
            self._slot_centers[Q] = euclidean_ball_int(metric, Q, self.ctx.eta, metric.dimension)
        return self._slot_centers[Q]

    def evaluate(self, state: tuple) -> _Evaluation:
        cached = self._nodes.get(state)
        if cached is not None:
            return cached
        ctx = self.ctx
        instance = ctx.instance
        node = _Evaluation(None)
        if ctx.metric.continuous:
            centers = []
            for Q in state:
                x, unproven = self._slot_center(Q)
                if x is None:
                    if unproven:
                        ctx.flag('unproven-ball-int')
                    break
                centers.append(x)
            X = tuple(centers) if len(centers) == instance.k else None
        else:
            X = select_centers(instance, state) or None
        if X is not None:
            f = exact_assign(instance, ctx.Y, X)
            if f:
                d = ctx.metric.distances(ctx.Y.points, list(X))
                node = _Evaluation(X, solution_cost(instance, ctx.Y, X, f), d,
                                   ctx.weights * np.power(d.min(axis=1), instance.z))
        self._nodes[state] = node
        return node

    def extend(self, state: tuple, slot: int, point: int, radius: float) -> tuple | None:
        ctx = self.ctx
        if ctx.metric.continuous:
            refined = state[slot].add(point, radius)
        else:
            refined = filter_candidates(ctx.metric, state[slot], [Request(point, radius)], ctx.eta)
            if not refined:
                return None
        return state[:slot] + (refined,) + state[slot + 1:]

    def children(self, root: _Root, state: tuple, node: _Evaluation) -> list[tuple[tuple, int, int, float]]:
        """Unhappy (slot, point) moves by descending contribution w(p) d(p, X)^z, then slot, then coreset order."""
        ctx = self.ctx
        moves = []
        for i in range(ctx.instance.k):
            limit = root.radii[i] * (1 + FEASIBILITY_RTOL)
            for p in root.balls[i]:
                row = ctx.rows[p]
                d = float(node.distances[row, i])
                if d > limit:
                    moves.append((-float(node.mass[row]), i, row, p, d))
        moves.sort(key=lambda move: move[:3])
        out = []
        for _, i, _, p, d in moves:
            radius = d / (1 + ctx.epsilon)
            child = self.extend(state, i, p, radius)
            if child is not None:
                out.append((child, i, p, radius))
        return out

    def _record(self, G: float, root_index: int, depth: int, node: _Evaluation, step) -> TraceRecord:
        slot, point, radius = step if step is not None else (None, None, None)
        return TraceRecord(G, self.index, root_index, depth, slot, point, radius,
                           None if node.centers is None else node.cost)

    def explore(self, root_index: int, root: _Root, G: float) -> tuple[_Hit | None, _RootMemo | None]:
        ctx = self.ctx
        threshold = (1 + 5 * ctx.epsilon) * G
        visited: dict[tuple, int] = {}
        records: list[tuple[float, CentersType]] = []
        depth_hit = False
        stack = [(root.state, 0, None)]
        while stack:
            state, depth, step = stack.pop()
            remaining = ctx.depth_cap - depth
            if visited.get(state, -1) >= remaining:
                continue
            visited[state] = remaining
            node = self.evaluate(state)
            ctx.visit(node, self._record(G, root_index, depth, node, step))
            if node.centers is None:
                continue
            if not records or node.cost < records[-1][0]:
                records.append((node.cost, node.centers))
            if cost_at_most(node.cost, threshold):
                return _Hit(node.centers, node.cost, self.index, root_index), None
            moves = self.children(root, state, node)
            if moves and remaining <= 0:
                depth_hit = True
                continue
            for child, i, p, radius in reversed(moves):
                stack.append((child, depth + 1, (i, p, radius)))
        if depth_hit:
            ctx.flag('depth')
        return None, _RootMemo(tuple(records))

    def walk(self, root_index: int, root: _Root, G: float) -> tuple[_Hit | None, _RootMemo | None]:
        ctx = self.ctx
        threshold = (1 + 5 * ctx.epsilon) * G
        records: list[tuple[float, CentersType]] = []
        depth_hit = False
        for trial in range(ctx.config.random_trials):
            rng = np.random.default_rng((ctx.config.seed, self.index, root_index, trial))
            state, depth, step = root.state, 0, None
            while state is not None:
                node = self.evaluate(state)
                ctx.visit(node, self._record(G, root_index, depth, node, step))
                if node.centers is None:
                    break
                if not records or node.cost < records[-1][0]:
                    records.append((node.cost, node.centers))
                if cost_at_most(node.cost, threshold):
                    return _Hit(node.centers, node.cost, self.index, root_index), None
                if depth >= ctx.depth_cap:
                    depth_hit = True
                    break
                try:
                    p, i = sample_unhappy(ctx.metric, ctx.Y, node.centers, root.balls, ctx.instance.z, rng)
                except DegenerateSamplingError:
                    break
                radius = float(node.distances[ctx.rows[p], i]) / (1 + ctx.epsilon)
                state, depth, step = self.extend(state, i, p, radius), depth + 1, (i, p, radius)
        if depth_hit:
            ctx.flag('depth')
        return None, _RootMemo(tuple(records))

    def _solve_root(self, root_index: int, root: _Root, G: float) -> _Hit | None:
        memo = self._memo.get(root_index)
        if memo is not None:
            threshold = (1 + 5 * self.ctx.epsilon) * G
            for cost, centers in memo.records:
                if cost_at_most(cost, threshold):
                    return _Hit(centers, cost, self.index, root_index)
            return None
        if self.ctx.config.branch_mode == 'randomized':
            hit, memo = self.walk(root_index, root, G)
        else:
            hit, memo = self.explore(root_index, root, G)
        if memo is not None:
            self._memo[root_index] = memo
        return hit

    def solve(self, G: float) -> _Hit | None:
        budget = self.ctx.config.leader_budget
        i = 0
        while True:
            root = self._root(i)
            if root is None:
                return None
            if i >= budget:
                self.ctx.flag('leader-budget')
                return None
            hit = self._solve_root(i, root, G)
            if hit:
                return hit
            i += 1


def _searches(ctx: _SearchContext) -> list[_Search]:
    instance, config = ctx.instance, ctx.config
    k = instance.k
    if not _uses_coloring(instance):
        classes = () if instance.metric.continuous else tuple(instance.metric.facilities)
        return [_Search(ctx, (classes,) * k, 0, symmetric=True)]
    searches = []
    seen = set()
    for t in range(config.retries(k)):
        colors = color_code(instance.metric.facilities, k, (config.seed, t))
        if any(not c for c in colors) or colors in seen:
            continue
        seen.add(colors)
        searches.append(_Search(ctx, colors, t, symmetric=False))
    logging.info('Color coding kept %s of %s colorings.', len(searches), config.retries(k))
    return searches


def build_coreset(instance: Instance, config: SolverConfig) -> WeightedPointSet:
    if config.coreset == 'ring-sampling':
        return ring_sampling_coreset(instance, config.effective_epsilon(instance.z), config.seed,
                                     config.coreset_constant)
    return identity_coreset(instance)


def _solution(instance: Instance, X: CentersType, ctx: _SearchContext, flags: set[str],
              metadata: dict) -> Solution | Infeasible:
    if instance.metric.continuous:
        X = perturb_duplicates(X, ctx.unit * DUPLICATE_OFFSET)
    P = instance.point_set()
    f = exact_assign(instance, P, X)
    if not f:
        return f
    cost = solution_cost(instance, P, X, f)
    metadata.update({'nodes': ctx.nodes, 'coreset_size': len(ctx.Y), 'depth_cap': ctx.depth_cap,
                     'budgets_hit': sorted(ctx.flags)})
    if isinstance(instance.variant, FaultTolerant):
        metadata['original_cost'] = instance.variant.ell * cost
    if ctx.trace is not None:
        metadata['trace'] = [asdict(r) for r in ctx.trace]
    return Solution(X, f, cost, frozenset(flags), metadata)


def epas_solve(instance: Instance, config: SolverConfig = None) -> Solution | Infeasible:
    config = config or SolverConfig.for_instance(instance)
    if config.branch_mode == 'randomized' and not isinstance(instance.variant, Vanilla):
        raise UnsupportedVariantError('Randomized branching is defined for vanilla instances only.')
    epsilon = config.effective_epsilon(instance.z)
    Y = build_coreset(instance, config)
    if not len(Y):
        raise ContractViolationError('The instance has no point of positive weight.')
    if config.guess_mode == 'provided':
        guesses = [float(config.guess)]
    else:
        try:
            guesses = guess_opt_values(instance, Y, epsilon)
        except InfeasibleInstanceError as e:
            logging.info('Instance %s is infeasible: %s', instance.name, e)
            return Infeasible(str(e), 'infeasible-instance')
    lower = lp_lower_bound(instance, Y)
    ctx = _SearchContext(instance, Y, config)
    logging.info('Searching %s guesses on a coreset of %s points (LP bound %.6g, depth cap %s).',
                 len(guesses), len(Y), lower, ctx.depth_cap)
    searches = _searches(ctx)
    try:
        for G in guesses:
            if lower > (1 + 5 * epsilon) * G * (1 + LP_RTOL) + LP_ATOL:
                logging.debug('Guess %.6g is below the LP bound.', G)
                continue
            hit = ctx.run(searches, G)
            if not hit:
                continue
            logging.info('Guess %.6g succeeded after %s nodes.', G, ctx.nodes)
            flags = {'unproven-ball-int'} & ctx.flags
            metadata = {'source': 'epas', 'guess': G, 'guesses': len(guesses), 'coloring': hit.coloring,
                        'root': hit.root, 'coreset_cost': hit.cost, 'lp_bound': lower}
            result = _solution(instance, hit.centers, ctx, flags, metadata)
            if not result and config.coreset != 'identity':
                logging.warning('Coreset centers admit no assignment of the full point set (%s); '
                                'retrying on the identity coreset.', result.reason)
                return epas_solve(instance, replace(config, coreset='identity'))
            return result
    except _BudgetExhausted:
        ctx.flag('node-budget')
    if not ctx.flags & SEARCH_BUDGETS:
        best = 'none' if ctx.best is None else f'{ctx.best[0]:.6g}'
        logging.warning('Every guess failed after %s nodes with no budget hit (cheapest coreset cost %s).',
                        ctx.nodes, best)
        return Infeasible(f'the search finished without meeting any guess (cheapest coreset cost {best})',
                          'search-exhausted')
    if ctx.best is None:
        logging.warning('Search budgets (%s) ran out before any feasible center set.', ', '.join(sorted(ctx.flags)))
        return Infeasible('search budgets ran out before any feasible center set', 'budget-exhausted')
    logging.warning('No guess succeeded within the search budgets (%s); returning the cheapest center set seen.',
                    ', '.join(sorted(ctx.flags)))
    metadata = {'source': 'epas', 'guess': None, 'guesses': len(guesses), 'coreset_cost': ctx.best[0],
                'lp_bound': lower}
    return _solution(instance, ctx.best[1], ctx, {'budget-exhausted'} | ctx.flags, metadata)


def compute_solution(instance: Instance, state: SearchState, G: float, config: SolverConfig = None,
                     Y: WeightedPointSet = None, colors: Sequence[Sequence[int]] = None) -> CentersType | Infeasible:
    config = config or SolverConfig.for_instance(instance)
    Y = Y if Y is not None else instance.point_set()
    if len(state.requests) != instance.k:
        raise ContractViolationError('One request set per slot is required.')
    metric = instance.metric
    if colors is None:
        if _uses_coloring(instance):
            raise ContractViolationError('Color-coded variants need one color class per slot.')
        colors = ((),) * instance.k if metric.continuous else (tuple(metric.facilities),) * instance.k
    ctx = _SearchContext(instance, Y, config)
    ctx.depth_cap = max(0, ctx.depth_cap - state.depth)
    search = _Search(ctx, colors, 0, symmetric=False)
    if metric.continuous:
        start = tuple(state.requests)
    else:
        start = tuple(filter_candidates(metric, colors[i], Q, ctx.eta) for i, Q in enumerate(state.requests))
    leaders = tuple(Q.points[0] if len(Q) else -1 for Q in state.requests)
    root = _Root(leaders, tuple(state.radii), tuple(tuple(b) for b in state.balls), start)
    try:
        hit, _ = search.explore(0, root, G)
    except _BudgetExhausted:
        return Infeasible('node budget exhausted', 'node-budget')
    if hit is None:
        return Infeasible('no node of the refinement tree meets the threshold', 'compute-solution')
    return hit.centers


def witness_set(m: MetricSpace, Y: WeightedPointSet, fstar: Assignment, O: CentersType, X: CentersType,
                epsilon: float) -> set[tuple[int, int]]:
    """Pairs (p, i) served by o_i in ``fstar`` whose current center x_i is more than (1 + epsilon) d(p, o_i) away."""
    if len(O) != len(X):
        raise ContractViolationError('O and X must have the same number of slots.')
    points = set(Y.points)
    out = set()
    for (p, i) in fstar.entries:
        if p in points and m.distance(p, X[i]) > (1 + epsilon) * m.distance(p, O[i]) * (1 + FEASIBILITY_RTOL):
            out.add((p, i))
    return out


def leaders_of(m: MetricSpace, Y: WeightedPointSet, O: CentersType, fstar: Assignment) -> tuple[int, ...]:
    served: dict[int, list[int]] = {}
    for (p, i) in fstar.entries:
        served.setdefault(i, []).append(p)
    order = {p: r for r, p in enumerate(Y.points)}
    leaders = []
    for i, o in enumerate(O):
        pool = sorted((p for p in served.get(i, ()) if p in order), key=order.get) or list(Y.points)
        leaders.append(pool[int(np.argmin(m.distances_from(o, pool)))])
    return tuple(leaders)


def consistent_root(instance: Instance, Y: WeightedPointSet, O: CentersType, fstar: Assignment,
                    epsilon: float = None, c: float = DEFAULT_BALL_CONSTANT) -> RootGuess:
    epsilon = epsilon or instance.epsilon
    metric = instance.metric
    unit, _, grid = radius_grid(metric, epsilon)
    leaders = leaders_of(metric, Y, O, fstar)
    radii = []
    for leader, o in zip(leaders, O):
        r = bracket_radius(unit, grid, metric.distance(leader, o))
        if r is None:
            raise ContractViolationError(f'Distance from leader {leader} exceeds the radius grid.')
        radii.append(r)
    balls = tuple(ball_members(metric, p, c * r / epsilon, Y.points) for p, r in zip(leaders, radii))
    return RootGuess(leaders, tuple(radii), balls)


def check_witness_properties(m: MetricSpace, Y: WeightedPointSet, fstar: Assignment, O: CentersType,
                             X: CentersType, root: RootGuess, epsilon: float,
                             c: float = DEFAULT_BALL_CONSTANT) -> list[WitnessCheck]:
    order = {p: r for r, p in enumerate(Y.points)}
    checks = []
    for p, i in sorted(witness_set(m, Y, fstar, O, X, epsilon), key=lambda pair: (order[pair[0]], pair[1])):
        r = root.radii[i]
        checks.append(WitnessCheck(
            point=p, slot=i, assigned=fstar.slots_of(p).get(i, 0) > 0,
            unhappy=m.distance(p, X[i]) > (1 + epsilon) * m.distance(p, O[i]),
            outside=m.distance(p, X[i]) >= r * (1 - FEASIBILITY_RTOL),
            near_leader=m.distance(p, root.leaders[i]) <= c / epsilon * r * (1 + FEASIBILITY_RTOL)))
    return checks


def planted_colors(instance: Instance, O: CentersType) -> tuple[tuple[int, ...], ...]:
    """A coloring in which slot i owns o_i: uncolored variants see every facility, others the nearest-center cells."""
    metric = instance.metric
    k = instance.k
    if metric.continuous:
        return ((),) * k
    F = list(metric.facilities)
    if not _uses_coloring(instance):
        return (tuple(F),) * k
    owner = np.argmin(metric.distances(F, list(O)), axis=1)
    slot_of = {f: int(j) for f, j in zip(F, owner)}
    slot_of.update({o: i for i, o in enumerate(O)})
    return tuple(tuple(f for f in F if slot_of[f] == i) for i in range(k))


def follow_witness_path(instance: Instance, O: CentersType, fstar: Assignment, G: float,
                        config: SolverConfig = None, Y: WeightedPointSet = None) -> WitnessPath:
    """
    Walk the refinement tree from the consistent root, always taking the first unhappy child that is a witness
    pair of the optimum ``(O, fstar)``.

    Every problem found along the way is reported: inconsistent requests, radii outside the window
    [r'/(1 + epsilon), (c + 1) r'/epsilon], per-slot sequences that are not scatterings at epsilon/2, and nodes
    above the threshold without a witness child.
    """
    config = config or SolverConfig.for_instance(instance)
    Y = Y if Y is not None else instance.point_set()
    metric, k, z = instance.metric, instance.k, instance.z
    epsilon, eta, c = config.effective_epsilon(z), config.slack(z), config.ball_constant_c
    depth_cap = config.depth_cap or default_depth_cap(instance, epsilon, config.scatter_dimension)
    root = consistent_root(instance, Y, O, fstar, epsilon, c)
    ballsets = [frozenset(b) for b in root.balls]
    colors = planted_colors(instance, O)
    Qs = [RequestSet((Request(p, r),)) for p, r in zip(root.leaders, root.radii)]
    threshold = (1 + 5 * epsilon) * G
    order = {p: r for r, p in enumerate(Y.points)}
    weights = Y.weight_of
    triples: list[list[ScatterTriple]] = [[] for _ in range(k)]
    steps: list[PathStep] = []
    problems: list[str] = []
    succeeded = False
    pending: tuple[int, Request] | None = None
    for depth in range(depth_cap + 1):
        for i, Q in enumerate(Qs):
            for req in Q:
                if metric.distance(req.point, O[i]) > req.radius * (1 + FEASIBILITY_RTOL):
                    problems.append(f'depth {depth}: request ({req.point}, {req.radius:.6g}) of slot {i} '
                                    f'is inconsistent')
        X = gen_ball_int(instance, colors, Qs, eta)
        if not X:
            problems.append(f'depth {depth}: ball intersection failed ({X.reason})')
            break
        f = exact_assign(instance, Y, X)
        if not f:
            problems.append(f'depth {depth}: assignment failed ({f.reason})')
            break
        cost = solution_cost(instance, Y, X, f)
        slot, request = pending if pending is not None else (None, None)
        steps.append(PathStep(depth, X, cost, slot, request))
        if cost_at_most(cost, threshold):
            succeeded = True
            break
        if depth == depth_cap:
            problems.append(f'depth cap {depth_cap} reached')
            break
        nearest = metric.distances(Y.points, list(X)).min(axis=1)
        candidates = [(p, i) for p, i in witness_set(metric, Y, fstar, O, X, epsilon)
                      if p in ballsets[i] and metric.distance(p, X[i]) > root.radii[i] * (1 + FEASIBILITY_RTOL)]
        if not candidates:
            problems.append(f'depth {depth}: cost {cost:.6g} above {threshold:.6g} without a witness child')
            break
        p, i = min(candidates, key=lambda pair: (-weights[pair[0]] * nearest[order[pair[0]]] ** z, pair[1],
                                                 order[pair[0]]))
        radius = metric.distance(p, X[i]) / (1 + epsilon)
        low, high = root.radii[i] / (1 + epsilon), (c + 1) * root.radii[i] / epsilon
        if not low * (1 - FEASIBILITY_RTOL) <= radius <= high * (1 + FEASIBILITY_RTOL):
            problems.append(f'depth {depth}: radius {radius:.6g} of slot {i} outside [{low:.6g}, {high:.6g}]')
        triples[i].append(ScatterTriple(X[i], p, radius))
        Qs[i] = Qs[i].add(p, radius)
        pending = (i, Request(p, radius))
    sequences = tuple(ScatteringSequence(tuple(t)) for t in triples)
    for i, seq in enumerate(sequences):
        violation = validate_scattering(seq, epsilon / 2, metric, covering_slack=eta)
        if violation is not None:
            problems.append(f'slot {i}: {violation.condition} violated at triple {violation.index}')
    return WitnessPath(root, tuple(steps), tuple(Qs), sequences, succeeded, tuple(problems))


def witness_mass_check(m: MetricSpace, Y: WeightedPointSet, X: CentersType, O: CentersType, G: float,
                       epsilon: float, z: float, balls: Sequence[Sequence[int]] = None) -> MassCheck:
    """
    Share of the Voronoi cost of X carried by the unhappy points W = {p : d(p, X) > (1 + epsilon) d(p, O)}.

    Passes when W lies inside the union of ``balls`` (if given) and the share is at least epsilon / 10.
    """
    weights = np.array(Y.weights)
    current = np.power(m.distances(Y.points, list(X)).min(axis=1), z)
    cost = float(np.dot(weights, current))
    if not cost > (1 + 5 * epsilon) * G:
        raise PremiseError(f'cost {cost:.6g} does not exceed (1 + 5 epsilon) G = {(1 + 5 * epsilon) * G:.6g}.')
    best = m.distances(Y.points, list(O)).min(axis=1)
    unhappy = m.distances(Y.points, list(X)).min(axis=1) > (1 + epsilon) * best * (1 + FEASIBILITY_RTOL)
    ratio = float(np.dot(weights[unhappy], current[unhappy])) / cost
    contained = True
    if balls is not None:
        covered = frozenset().union(*[frozenset(b) for b in balls])
        contained = all(p in covered for p, bad in zip(Y.points, unhappy) if bad)
    return MassCheck(ratio, contained, contained and ratio >= epsilon / 10)
