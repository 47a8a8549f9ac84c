from __future__ import absolute_import, annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import pandas as pd

from .core import EpasClient
from .documents import generate_instance, serialize_instance
from .exceptions import EpasError
from .utilities import CORESET_KINDS, FAMILIES, OUTPUT_FORMATS, VARIANT_NAMES

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_BUDGET = 3
EXIT_AUDIT_FAILED = 4
LOG_LEVEL_ENV = 'EPAS_LOG_LEVEL'
MODES = {'det': 'deterministic', 'rand': 'randomized'}


class JsonRecordFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        entry = {'time': self.formatTime(record), 'level': record.levelname, 'logger': record.name,
                 'message': record.getMessage()}
        if record.exc_info:
            entry['exception'] = self.formatException(record.exc_info)
        return json.dumps(entry)


def configure_logging(stream=None):
    handler = logging.StreamHandler(stream or sys.stderr)
    handler.setFormatter(JsonRecordFormatter())
    root = logging.getLogger()
    root.handlers = [handler]
    root.setLevel(os.environ.get(LOG_LEVEL_ENV, 'WARNING').upper())


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _variant_block(value: str | None) -> dict | None:
    if value is None:
        return None
    if value.lstrip().startswith('{'):
        return json.loads(value)
    return {'name': value}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='epas-clustering', description='Approximation scheme for constrained (k, z)-clustering.')
    sub = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

    output = _Parser(add_help=False)
    output.add_argument('--out', help='output file (default: stdout)')
    output.add_argument('--format', choices=OUTPUT_FORMATS, default='json')
    output.add_argument('--workers', type=int, default=None)

    loaded = _Parser(add_help=False)
    loaded.add_argument('--instance', required=True, help='instance document path')
    loaded.add_argument('--epsilon', type=float, default=None)
    loaded.add_argument('--variant', default=None, help='variant block as JSON, or a bare variant name')
    loaded.add_argument('--seed', type=int, default=0)

    search = _Parser(add_help=False)
    search.add_argument('--mode', choices=sorted(MODES), default='det')
    search.add_argument('--depth-cap', type=int, default=None)
    search.add_argument('--leader-budget', type=int, default=None)
    search.add_argument('--node-budget', type=int, default=None)

    solve = sub.add_parser('solve', parents=[loaded, output, search], help='run the approximation scheme')
    solve.add_argument('--coreset', choices=CORESET_KINDS, default='identity')
    solve.add_argument('--guess', type=float, default=None, help='fixed guess of the optimum cost')
    solve.add_argument('--trace', default=None, help='write search trace records (JSON lines) to this path')
    solve.add_argument('--with-oracle', action='store_true')

    sub.add_parser('oracle', parents=[loaded, output], help='exhaustive optimum for small instances')

    audit = sub.add_parser('audit-coreset', parents=[loaded, output], help='audit a coreset construction')
    audit.add_argument('--coreset', choices=CORESET_KINDS, default='ring-sampling')
    audit.add_argument('--universal', action='store_true', help='audit every coloring constraint (fair only)')

    probe = sub.add_parser('scatter-probe', parents=[loaded, output], help='longest scattering per radius')
    probe.add_argument('--budget', type=int, default=None)

    bench = sub.add_parser('bench', parents=[output, search], help='seeded benchmark against the oracle')
    bench.add_argument('--size', type=int, default=20)
    bench.add_argument('--seed', type=int, default=0)
    bench.add_argument('--epsilon', type=float, nargs='+', default=[0.2, 0.5])
    bench.add_argument('--family', choices=FAMILIES, nargs='+', default=None)
    bench.add_argument('--variant', choices=VARIANT_NAMES, nargs='+', default=None)
    bench.add_argument('--timing', action='store_true', help='keep the wall_time column')

    generate = sub.add_parser('generate', help='write a seeded instance document')
    generate.add_argument('--family', choices=FAMILIES, required=True)
    generate.add_argument('--n', type=int, required=True)
    generate.add_argument('--f', type=int, required=True)
    generate.add_argument('--k', type=int, required=True)
    generate.add_argument('--z', type=float, default=1.0)
    generate.add_argument('--variant', choices=VARIANT_NAMES, default='vanilla')
    generate.add_argument('--seed', type=int, default=0)
    generate.add_argument('--epsilon', type=float, default=0.5)
    generate.add_argument('--out', default=None)
    return parser


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text if text.endswith('\n') else text + '\n')
    else:
        Path(out).write_text(text)


def _table(df: pd.DataFrame, fmt: str) -> str:
    if fmt == 'csv':
        return df.to_csv(index=False)
    return df.to_json(orient='records', double_precision=15)


def _solver_overrides(args) -> dict:
    overrides = {'branch_mode': MODES[args.mode], 'seed': args.seed}
    for name in ('depth_cap', 'leader_budget', 'node_budget'):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, 'coreset', None) is not None:
        overrides['coreset'] = args.coreset
    if getattr(args, 'guess', None) is not None:
        overrides.update({'guess_mode': 'provided', 'guess': args.guess})
    if getattr(args, 'trace', None) is not None:
        overrides['trace'] = True
    return overrides


def _load(client: EpasClient, args):
    return client.load_instance(args.instance, epsilon=args.epsilon, variant=_variant_block(args.variant))


def _solution_exit(result) -> int:
    if not result:
        return EXIT_BUDGET if result.tag == 'budget-exhausted' else EXIT_INFEASIBLE
    return EXIT_BUDGET if result.budget_exhausted else EXIT_OK


def run_solve(client: EpasClient, args) -> int:
    instance = _load(client, args)
    result = client.solve(instance, **_solver_overrides(args))
    if args.trace is not None:
        records = result.metadata.get('trace', []) if result else []
        Path(args.trace).write_text(''.join(json.dumps(r, sort_keys=True) + '\n' for r in records))
    if args.format == 'csv':
        triples = result.assignment.triples() if result else []
        _emit(pd.DataFrame(triples, columns=['point', 'slot', 'weight']).to_csv(index=False), args.out)
    else:
        _emit(client.report(instance, result, with_oracle=args.with_oracle), args.out)
    return _solution_exit(result)


def run_oracle(client: EpasClient, args) -> int:
    instance = _load(client, args)
    result = client.oracle(instance)
    if args.format == 'csv':
        triples = result.assignment.triples() if result else []
        _emit(pd.DataFrame(triples, columns=['point', 'slot', 'weight']).to_csv(index=False), args.out)
    else:
        _emit(client.report(instance, result), args.out)
    return EXIT_OK if result else EXIT_INFEASIBLE


def run_audit(client: EpasClient, args) -> int:
    instance = _load(client, args)
    audit = client.audit(instance, args.coreset, args.epsilon, seed=args.seed, universal=args.universal)
    epsilon = instance.epsilon if args.epsilon is None else args.epsilon
    row = {'coreset': args.coreset, 'max_error': audit.max_error, 'checked': audit.checked,
           'exhaustive': audit.exhaustive, 'one_sided': len(audit.one_sided), 'passed': audit.max_error <= epsilon}
    if args.format == 'csv':
        _emit(pd.DataFrame([row]).to_csv(index=False), args.out)
    else:
        _emit(json.dumps(row, sort_keys=True), args.out)
    if not row['passed']:
        logging.warning('Coreset audit failed: error %.6g exceeds epsilon %s.', audit.max_error, epsilon)
        return EXIT_AUDIT_FAILED
    return EXIT_OK


def run_scatter_probe(client: EpasClient, args) -> int:
    instance = _load(client, args)
    kwargs = {} if args.budget is None else {'budget': args.budget}
    df = client.scatter_probe(instance, args.epsilon, seed=args.seed, **kwargs)
    _emit(_table(df, args.format), args.out)
    return EXIT_OK


def run_bench(client: EpasClient, args) -> int:
    overrides = _solver_overrides(args)
    # the suite seed also seeds the generator
    overrides.pop('seed')
    df = client.bench(args.size, args.seed, args.epsilon, args.family, args.variant, **overrides)
    exhausted = int((df['status'] == 'budget-exhausted').sum())
    if not args.timing:
        df = df.drop(columns=['wall_time'])
    _emit(_table(df, args.format), args.out)
    if exhausted:
        logging.warning('%s of %s bench runs hit a search budget.', exhausted, len(df))
        return EXIT_BUDGET
    return EXIT_OK


def run_generate(args) -> int:
    doc = generate_instance(args.family, args.n, args.f, args.k, args.z, args.variant, args.seed, args.epsilon)
    _emit(serialize_instance(doc), args.out)
    return EXIT_OK


COMMANDS = {'solve': run_solve, 'oracle': run_oracle, 'audit-coreset': run_audit,
            'scatter-probe': run_scatter_probe, 'bench': run_bench}


def main(argv: list[str] = None) -> int:
    configure_logging()
    try:
        args = build_parser().parse_args(argv)
        if args.command == 'generate':
            return run_generate(args)
        client = EpasClient(workers=args.workers, instance_name='cli')
        return COMMANDS[args.command](client, args)
    except _UsageError as e:
        logging.error('Usage error: %s', e)
        return EXIT_ERROR
    except (EpasError, ValueError, OSError) as e:
        logging.error('%s: %s', type(e).__name__, e)
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
