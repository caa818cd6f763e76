import logging
from argparse import Namespace
from pathlib import Path

import numpy as np

from src.cli.common import add_config_options, add_output_options, resolve_config, write_manifest
from src.core.exceptions import EXIT_OK, ConfigError
from src.services.signal_model import generate_sources, mix_and_observe
from src.storage.files import write_json, write_matrix

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        'simulate',
        help='draw sources and noisy mixtures from a configuration',
        description='Writes mixtures.csv (L x T), sources.csv (M x T) and the generating parameters.',
    )
    add_config_options(parser)
    add_output_options(parser)
    parser.set_defaults(handler=handle)


def handle(args: Namespace) -> int:
    cfg = resolve_config(args)
    if cfg.noise.snr_db is not None:
        raise ConfigError('simulate needs explicit noise variances, not an SNR grid')
    truth = cfg.true_params()
    rng = np.random.default_rng(cfg.seed)
    S = generate_sources(cfg.sources, cfg.dims.T, rng)
    X = mix_and_observe(truth.A, S, truth.lam, rng)
    logger.info('simulated %d mixtures of %d sources, T=%d, seed %d', cfg.dims.L, cfg.dims.M, cfg.dims.T, cfg.seed)

    out_dir = Path(args.out)
    outputs = [
        write_matrix(out_dir / 'mixtures.csv', X.data),
        write_matrix(out_dir / 'sources.csv', S.data),
        write_json(out_dir / 'params.json', truth.dict(by_alias=True)),
    ]
    write_manifest(out_dir, 'simulate', cfg, outputs)
    return EXIT_OK
