import logging
import sys
from argparse import ArgumentParser
from typing import List, Optional

from src.cli import crlb, estimate, experiment, simulate
from src.core import config
from src.core.exceptions import EXIT_USAGE, SeparationError

logger = logging.getLogger(__name__)

COMMANDS = (simulate, estimate, crlb, experiment)
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog='semiblind',
        description='Semi-blind separation of stationary sources with known spectra',
    )
    parser.add_argument('--log-level', type=str.upper, choices=LOG_LEVELS, default=None,
                        help='overrides SEMIBLIND_LOG_LEVEL')
    parser.add_argument('--version', action='version', version=f'%(prog)s {config.PROJECT_VERSION}')
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.log_level:
        config.configure_logging(args.log_level)
    if getattr(args, 'handler', None) is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return args.handler(args)
    except SeparationError as exc:
        logger.error('%s: %s', type(exc).__name__, exc)
        return exc.exit_code


if __name__ == '__main__':
    sys.exit(main())
