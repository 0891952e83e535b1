"""
Frostlab command line

    frostlab run <config.yml>      run the configured experiments
    frostlab gen <kind> [options]  write a generated DeltaSet
    frostlab verify <results.csv>  re-check ratios and pass flags

Exit codes: 0 all criteria passed, 1 a bound criterion failed, 2 config or I/O error.
"""

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence

from . import generators
from .config import load_config
from .errors import ConfigError, FrostlabError
from .experiments import run_experiment
from .grid_core import write_set
from .parallel import configure_threads
from .reports import SCHEMAS, emit_report, verify

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CRITERION_FAILED = 1
EXIT_CONFIG_ERROR = 2


def _schema_epilog() -> str:
    lines = ['CSV schemas:']
    lines.extend(f"  {name}: {','.join(columns)}" for name, columns in SCHEMAS.items())
    lines.append('')
    lines.append('FROSTLAB_THREADS caps the worker pool (default: all cores).')
    return '\n'.join(lines)


def run(config_path, output_dir: Optional[Path] = None) -> int:
    """Execute every experiment of a config file and write the reports"""
    start_time = time.time()
    try:
        config = load_config(config_path)
        configure_threads(config.threads)
        out_dir = Path(output_dir) if output_dir is not None else config.output_dir

        rows, criteria, names, params = [], [], [], []
        for order, experiment in enumerate(config.experiments):
            print(f"▶ {experiment.name} (line {experiment.line})")
            result = run_experiment(experiment, config.seed, order, out_dir)
            rows.extend(result.rows)
            criteria.extend(result.criteria)
            names.append(result.name)
            params.append(result.params)

        passed = all(criterion.passed for criterion in criteria if not criterion.advisory)
        summary = {
            'experiment': names,
            'params': params,
            'criteria': criteria,
            'pass': passed,
            'seed': config.seed,
            'runtime_ms': int(round((time.time() - start_time) * 1000)),
        }
        paths = emit_report(rows, summary, out_dir)
    except FrostlabError as e:
        print(f"❌ {e}")
        return EXIT_CONFIG_ERROR

    for criterion in criteria:
        mark = '✅' if criterion.passed else ('⚠️ ' if criterion.advisory else '❌')
        print(f"{mark} {criterion.experiment}/{criterion.name}: {criterion.detail}")
    print(f"Results written to {', '.join(str(path) for path in paths)}")
    return EXIT_OK if passed else EXIT_CRITERION_FAILED


def _parse_layers(text: str) -> List[tuple]:
    """'2:3,4:6' -> [(2, 3), (4, 6)]"""
    layers = []
    for part in filter(None, text.split(',')):
        a, b = part.split(':')
        layers.append((int(a), int(b)))
    return layers


def gen(args: argparse.Namespace) -> int:
    try:
        if args.kind == 'cantor':
            result = generators.cantor_set(args.level, args.s, args.seed)
        elif args.kind == 'ap':
            result = generators.ap_neighborhood_set(args.level, args.terms, args.spacing_exponent)
        elif args.kind == 'ap-intersection':
            result = generators.ap_intersection_set(args.level, _parse_layers(args.layers))
        else:
            first = generators.cantor_set(args.level, args.s, args.seed)
            second = generators.cantor_set(args.level, args.s2 if args.s2 else args.s, args.seed + 1)
            result = generators.product_set(first, second)
        write_set(args.out, result)
    except (FrostlabError, ValueError) as e:
        print(f"❌ {e}")
        return EXIT_CONFIG_ERROR
    except OSError as e:
        print(f"❌ cannot write {args.out}: {e.strerror}")
        return EXIT_CONFIG_ERROR
    print(f"✅ Wrote {result.cell_count} cells at level {result.level} to {args.out}")
    return EXIT_OK


def verify_command(path: str) -> int:
    try:
        ok, problems = verify(path)
    except ConfigError as e:
        print(f"❌ {e}")
        return EXIT_CONFIG_ERROR
    for problem in problems:
        print(f"❌ {problem}")
    if ok:
        print(f"✅ {path}: ratios and pass flags agree with the raw columns")
    return EXIT_OK if ok else EXIT_CRITERION_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='frostlab',
        description='Numerical lab for projections, incidences and Furstenberg-type estimates on δ-discretized sets',
        epilog=_schema_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    commands = parser.add_subparsers(dest='command', required=True)

    run_parser = commands.add_parser('run', help='run the experiments of a config file',
                                     epilog=_schema_epilog(),
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    run_parser.add_argument('config', help='YAML configuration')
    run_parser.add_argument('-o', '--output', type=Path, help='output directory (overrides output_dir)')

    gen_parser = commands.add_parser('gen', help='write a generated DeltaSet')
    gen_parser.add_argument('kind', choices=['cantor', 'ap', 'ap-intersection', 'product'])
    gen_parser.add_argument('--level', type=int, default=12)
    gen_parser.add_argument('--s', type=float, default=0.5, help='dimension (cantor, product)')
    gen_parser.add_argument('--s2', type=float, help='second factor dimension (product)')
    gen_parser.add_argument('--seed', type=int, default=0)
    gen_parser.add_argument('--terms', type=int, default=16)
    gen_parser.add_argument('--spacing-exponent', type=int, default=4)
    gen_parser.add_argument('--layers', default='', help="a:b pairs, e.g. '2:3,5:7'")
    gen_parser.add_argument('--out', required=True, help='output file')

    verify_parser = commands.add_parser('verify', help='re-check a results CSV')
    verify_parser.add_argument('csv')
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(asctime)s %(name)s %(levelname)s %(message)s')

    if args.command == 'run':
        return run(args.config, args.output)
    if args.command == 'gen':
        return gen(args)
    return verify_command(args.csv)


if __name__ == '__main__':
    sys.exit(main())
