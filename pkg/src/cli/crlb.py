import logging
from argparse import Namespace
from pathlib import Path

from src.cli.common import add_config_options, add_output_options, resolve_config, write_manifest
from src.core.exceptions import EXIT_IDENTIFIABILITY_WARNING, EXIT_OK, ConfigError
from src.models.experiment import ReportTable
from src.services.experiments import to_db
from src.services.fisher import crlb
from src.services.signal_model import source_spectra
from src.storage.files import write_json, write_table

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        'crlb',
        help='Cramer-Rao lower bound on the MSE of A and the noise variances',
        description='Writes crlb.csv (bound per parameter, linear and dB) and fim_summary.json.',
    )
    add_config_options(parser)
    parser.add_argument('--T', type=int, default=None, help='override the sample size')
    add_output_options(parser)
    parser.set_defaults(handler=handle)


def handle(args: Namespace) -> int:
    cfg = resolve_config(args)
    if args.T is not None:
        cfg = resolve_config(args, dims={'M': cfg.dims.M, 'L': cfg.dims.L, 'T': args.T})
    if cfg.noise.snr_db is not None:
        raise ConfigError('crlb needs explicit noise variances, not an SNR grid')
    bound = crlb(cfg.true_params(), source_spectra(cfg.sources, cfg.dims.T))

    table = ReportTable(columns=['parameter', 'crlb', 'crlb_db'])
    for label, value in zip(bound.labels, bound.diagonal()):
        table.add(label, value, to_db(value))

    out_dir = Path(args.out)
    outputs = [
        write_table(out_dir / 'crlb.csv', table),
        write_json(out_dir / 'fim_summary.json', {
            'condition_number': bound.condition_number,
            'pseudo_inverse': bound.pseudo_inverse,
            'T': cfg.dims.T,
        }),
    ]
    write_manifest(out_dir, 'crlb', cfg, outputs)
    if bound.pseudo_inverse:
        logger.warning('FIM is ill-conditioned (condition number %.3e); bounds come from the pseudo-inverse',
                       bound.condition_number)
        return EXIT_IDENTIFIABILITY_WARNING
    return EXIT_OK
