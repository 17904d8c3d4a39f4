"""
Entry point of the command line tool.
"""

import argparse
import json
import os
import sys
from typing import List
from typing import Optional

from loguru import logger

from ncindex import cli_reports
from ncindex import common

__author__ = 'Tiziano Bettio'
__copyright__ = """
Copyright (c) 2020 Tiziano Bettio

Permission is hereby granted, free of charge, to any person obtaining a copy
of this software and associated documentation files (the "Software"), to deal
in the Software without restriction, including without limitation the rights
to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
copies of the Software, and to permit persons to whom the Software is
furnished to do so, subject to the following conditions:

The above copyright notice and this permission notice shall be included in all
copies or substantial portions of the Software.

THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
SOFTWARE.
"""
__license__ = 'MIT'
__version__ = '0.3'


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='ncindex',
        description='Run index theory experiment suites and compare '
                    'their reports.')
    sub = parser.add_subparsers(dest='command', required=True)
    for name, entry in sorted(cli_reports.SUITES.items()):
        cmd = sub.add_parser(name, help=entry.description)
        cmd.add_argument('--config', help='JSON experiment config')
        cmd.add_argument('--seed', type=int, help='Seed of randomized '
                                                  'suites')
        cmd.add_argument('--out', help='Report path')
        cmd.add_argument('--strict', action='store_true',
                         help='Let suite errors propagate')
    regress = sub.add_parser('regress', help='Compare a report with its '
                                             'baseline')
    regress.add_argument('baseline')
    regress.add_argument('report')
    sub.add_parser('list', help='Show suites and parameter schemas')
    parser.add_argument('--ini', default=common.CONFIG_FILE,
                        help='Library configuration file')
    return parser


def _experiment(args: argparse.Namespace,
                cfg) -> cli_reports.ExperimentConfig:
    doc = {}
    if args.config:
        with open(args.config, 'r') as fhandler:
            doc = json.load(fhandler)
        if doc.get('command', args.command) != args.command:
            raise common.ConfigInvalid(f'Config is for {doc["command"]}, '
                                       f'not {args.command}')
    doc['command'] = args.command
    seed = args.seed
    if seed is None and 'seed' not in doc \
            and cli_reports.SUITES[args.command].randomized:
        seed = cfg.getint('base', 'seed')
        logger.info(f'Using the configured seed {seed}')
    out = args.out or os.path.join(cfg.get('base', 'out_dir'),
                                   f'{args.command}.json')
    return cli_reports.ExperimentConfig.from_dict(doc, seed, out)


def main(argv: Optional[List[str]] = None) -> int:
    """Runs one command; the exit status is 0 iff all checks pass."""
    args = build_parser().parse_args(argv)
    cfg = common.load_config(args.ini)
    common.use_config(cfg)
    logger.remove()
    logger.add(sys.stderr, level=cfg.get('base', 'log_level'))
    logger.debug(f'ncindex {common.__version__} command {args.command}')
    if args.command == 'list':
        print(cli_reports.list_suites())
        return 0
    try:
        if args.command == 'regress':
            summary = cli_reports.regress(args.baseline, args.report)
            print(json.dumps(summary.rows, indent=2, sort_keys=True))
            return 0 if summary.clean else 1
        experiment = _experiment(args, cfg)
    except common.NcIndexError as err:
        logger.error(str(err))
        return 2
    strict = args.strict or cfg.getboolean('base', 'strict')
    report = cli_reports.run(experiment, strict)
    report.write(experiment.output_path)
    return 0 if report.passed else 1


if __name__ == '__main__':
    sys.exit(main())
