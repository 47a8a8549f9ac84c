from __future__ import absolute_import, annotations

import logging
import math
import time

import numpy as np
import pandas as pd
from progressbar import progressbar

from .coreset import CoresetAudit, audit_coreset, audit_universal_coreset
from .documents import InstanceLibrary, revalidate_solution, serialize_solution
from .exceptions import UnsupportedVariantError
from .model import Infeasible, Instance, Solution, Violation
from .oracle import MAX_CENTER_SETS, brute_force_opt
from .scatter import DEFAULT_NODE_BUDGET, MAX_PROBED_RADII, longest_scattering
from .solver import SolverConfig, build_coreset, epas_solve
from .utilities import CoresetKindType, FamilyType, VariantNameType, seconds_to_hms

BENCH_COLUMNS = ['instance', 'variant', 'n', 'k', 'z', 'epsilon', 'status', 'epas_cost', 'oracle_cost', 'ratio',
                 'nodes', 'wall_time']


def cost_ratio(cost: float, reference: float) -> float:
    if reference > 0:
        return cost / reference
    return 1.0 if cost == 0 else math.inf


def _status(result: Solution | Infeasible) -> str:
    if not result:
        return result.tag if result.tag in ('unsupported', 'search-exhausted', 'budget-exhausted') else 'infeasible'
    return 'budget-exhausted' if result.budget_exhausted else 'ok'


class EpasClient(InstanceLibrary):
    def __init__(self, workers: int = None, instance_name: str = None, progress_bar_desc: str = None):
        super().__init__(workers=workers, instance_name=instance_name, progress_bar_desc=progress_bar_desc)

    def config(self, instance: Instance, **overrides) -> SolverConfig:
        return SolverConfig.for_instance(instance, **{'workers': self.workers, **overrides})

    def solve(self, instance: Instance, config: SolverConfig = None, **overrides) -> Solution | Infeasible:
        config = config or self.config(instance, **overrides)
        start = time.perf_counter()
        result = epas_solve(instance, config)
        elapsed = time.perf_counter() - start
        if result:
            logging.info('%s solved %s with cost %.6g in %s.', self.instance_name, instance.name, result.cost,
                         seconds_to_hms(elapsed))
        else:
            logging.info('%s found %s infeasible (%s).', self.instance_name, instance.name, result.tag)
        return result

    @staticmethod
    def oracle(instance: Instance, limit: int = MAX_CENTER_SETS) -> Solution | Infeasible:
        return brute_force_opt(instance, limit)

    def report(self, instance: Instance, result: Solution | Infeasible, with_oracle: bool = False) -> str:
        oracle_cost = None
        if with_oracle:
            reference = self.oracle(instance)
            if reference:
                oracle_cost = reference.cost
            else:
                logging.warning('Oracle found no feasible solution for %s.', instance.name)
        return serialize_solution(result, instance.name, oracle_cost)

    @staticmethod
    def revalidate(instance: Instance, document: str) -> list[Violation]:
        return revalidate_solution(instance, document)

    def audit(self, instance: Instance, coreset: CoresetKindType = 'ring-sampling', epsilon: float = None,
              seed: int = 0, universal: bool = False) -> CoresetAudit:
        epsilon = instance.epsilon if epsilon is None else epsilon
        Y = build_coreset(instance, self.config(instance, coreset=coreset, seed=seed, epsilon=epsilon))
        logging.info('Auditing a %s coreset of %s points against %s clients.', coreset, len(Y), len(instance.points))
        if universal:
            return audit_universal_coreset(instance, Y, seed=seed, workers=self.workers)
        return audit_coreset(instance, Y, epsilon, seed=seed, workers=self.workers)

    def scatter_probe(self, instance: Instance, epsilon: float = None, budget: int = DEFAULT_NODE_BUDGET,
                      seed: int = 0) -> pd.DataFrame:
        epsilon = instance.epsilon if epsilon is None else epsilon
        metric = instance.metric
        values = np.unique(metric.distances(list(metric.points), list(metric.facilities)))
        values = values[values > 0]
        if values.size > MAX_PROBED_RADII:
            values = values[np.linspace(0, values.size - 1, MAX_PROBED_RADII).astype(int)]
        df = pd.DataFrame()
        prefix = self._progress_prefix('Scatter probe ')
        for r in progressbar(values, prefix=prefix, redirect_stdout=True):
            result = longest_scattering(metric, epsilon, float(r), budget=budget, seed=seed)
            row = pd.DataFrame([{'radius': float(r), 'length': len(result.sequence),
                                 'exhaustive': result.exhaustive, 'partial': result.partial, 'nodes': result.nodes}])
            df = pd.concat([df, row], ignore_index=True)
        return df

    def bench(self, size: int, seed: int = 0, epsilons: list[float] = None, families: list[FamilyType] = None,
              variants: list[VariantNameType] = None, **overrides) -> pd.DataFrame:
        suite = self.generate_suite(size, seed, families, variants, epsilons)
        rows = []
        prefix = self._progress_prefix('Bench ')
        for instance in progressbar(suite, prefix=prefix, redirect_stdout=True):
            start = time.perf_counter()
            try:
                result = self.solve(instance, **overrides)
            except UnsupportedVariantError as e:
                logging.warning('Skipping %s: %s', instance.name, e)
                result = Infeasible(str(e), 'unsupported')
            wall_time = time.perf_counter() - start
            reference = self.oracle(instance)
            row = {'instance': instance.name, 'variant': instance.variant.name, 'n': len(instance.points),
                   'k': instance.k, 'z': instance.z, 'epsilon': instance.epsilon,
                   'status': _status(result),
                   'epas_cost': result.cost if result else math.nan,
                   'oracle_cost': reference.cost if reference else math.nan,
                   'ratio': cost_ratio(result.cost, reference.cost) if result and reference else math.nan,
                   'nodes': result.metadata.get('nodes', 0) if result else 0, 'wall_time': wall_time}
            rows.append(row)
        df = pd.DataFrame(rows, columns=BENCH_COLUMNS)
        worst = df['ratio'].max()
        logging.info('Bench of %s instances finished; worst ratio %s.', len(df), worst)
        return df


if __name__ == '__main__':
    client = EpasClient()
    demo = client.generate('clustered-gaussian', n=8, f=4, k=2, seed=7)
    ret_client = client.solve(demo)
    print(client.report(demo, ret_client, with_oracle=True))
