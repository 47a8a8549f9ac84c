from tabulate import tabulate

from dev_scripts.config_dev import DEV_SEED, DEV_SUITE_SIZE, DEV_WORKERS, check_env
from epas_clustering.core import EpasClient
from epas_clustering.solver import SolverConfig, epas_solve, follow_witness_path

# This script is used to debug the search on small seeded suites.
# Worker count, seed and suite size are read from the environment (see config_dev.py).

check_env()

client = EpasClient(workers=DEV_WORKERS, instance_name='debug', progress_bar_desc='debug')

APPROXIMATION_FACTOR = 30


def debug_bench():
    df = client.bench(DEV_SUITE_SIZE, seed=DEV_SEED, epsilons=[0.25, 0.5])
    print(tabulate(df, headers='keys', tablefmt='github', showindex=False, floatfmt='.4g'))
    worst = df['ratio'].max()
    bound = 1 + APPROXIMATION_FACTOR * df['epsilon'].max()
    assert worst <= bound, f'Worst ratio {worst} above {bound}.'


def debug_witness_paths():
    rows = []
    for instance in client.generate_suite(DEV_SUITE_SIZE, seed=DEV_SEED, variants=['vanilla']):
        best = client.oracle(instance)
        if not best:
            continue
        path = follow_witness_path(instance, best.centers, best.assignment, best.cost)
        rows.append([instance.name, len(path.steps) - 1, path.succeeded, '; '.join(path.problems) or '-'])
    print(tabulate(rows, headers=['instance', 'depth', 'succeeded', 'problems'], tablefmt='github'))


def debug_randomized():
    rows = []
    for instance in client.generate_suite(DEV_SUITE_SIZE, seed=DEV_SEED, variants=['vanilla']):
        det = epas_solve(instance, SolverConfig.for_instance(instance, seed=DEV_SEED))
        rand = epas_solve(instance, SolverConfig.for_instance(instance, seed=DEV_SEED, branch_mode='randomized'))
        rows.append([instance.name, det.cost if det else None, rand.cost if rand else None,
                     det.metadata.get('nodes') if det else None, rand.metadata.get('nodes') if rand else None])
    print(tabulate(rows, headers=['instance', 'det cost', 'rand cost', 'det nodes', 'rand nodes'],
                   tablefmt='github', floatfmt='.4g'))


def run():
    debug_bench()
    debug_witness_paths()
    debug_randomized()


if __name__ == "__main__":
    run()
