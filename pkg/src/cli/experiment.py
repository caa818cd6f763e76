import logging
import time
from argparse import Namespace
from pathlib import Path

from src.cli.common import add_output_options, resolve_config, write_manifest
from src.core import config
from src.core.exceptions import EXIT_OK
from src.core.presets import EXPERIMENT_NAMES
from src.services.experiments import get_experiment_service
from src.storage.files import write_report

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        'experiment',
        help='Monte-Carlo run of a reference experiment',
        description='Runs the named experiment and writes one CSV per result table plus a JSON summary.',
    )
    parser.add_argument('name', choices=EXPERIMENT_NAMES)
    parser.add_argument('--config', type=Path, default=None, help='JSON configuration replacing the embedded preset')
    parser.add_argument('--trials', type=int, default=None, help='Monte-Carlo trials per grid point')
    parser.add_argument('--T', type=int, default=None, help='sample size')
    parser.add_argument('--t-grid', type=int, nargs='+', default=None, help='sample sizes swept by exp1b and qml')
    parser.add_argument('--snr-grid', type=float, nargs='+', default=None, help='SNR values in dB swept by exp3')
    parser.add_argument('--threads', type=int, default=config.THREADS, help='worker threads for the trials')
    add_output_options(parser)
    parser.set_defaults(handler=handle)


def handle(args: Namespace) -> int:
    cfg = resolve_config(args, preset=args.name, trials=args.trials, T_grid=args.t_grid)
    if args.T is not None:
        cfg = resolve_config(args, preset=args.name, trials=args.trials, T_grid=args.t_grid,
                             dims={'M': cfg.dims.M, 'L': cfg.dims.L, 'T': args.T})
    if args.snr_grid is not None:
        cfg = resolve_config(args, preset=args.name, trials=args.trials, T_grid=args.t_grid,
                             dims=cfg.dims.dict(), noise={'snr_db': args.snr_grid})

    service = get_experiment_service(args.name)(cfg, args.threads)
    logger.info('running %s: %d trials per grid point on %d threads', args.name, cfg.trials, service.threads)
    started = time.perf_counter()
    report = service.run()
    logger.info('%s finished in %.1f s', args.name, time.perf_counter() - started)

    out_dir = Path(args.out)
    outputs = write_report(out_dir, report)
    write_manifest(out_dir, f'experiment {args.name}', cfg, outputs)
    return EXIT_OK
