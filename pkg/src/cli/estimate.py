import logging
from argparse import Namespace
from pathlib import Path

from src.cli.common import add_config_options, add_output_options, resolve_config, write_manifest
from src.core.exceptions import EXIT_NUMERICAL, EXIT_OK, DimensionError
from src.models.experiment import ReportTable
from src.models.signal import TimeSeriesBlock
from src.services.fisher import fisher_scoring, initialize, parameter_labels
from src.services.mmse import estimate_sources
from src.services.signal_model import dft_forward, source_spectra
from src.storage.files import read_matrix, write_json, write_matrix, write_table

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        'estimate',
        help='ML estimation of A and the noise variances, then ML-based MMSE source estimates',
        description='Reads an L x T mixture CSV and writes theta_hat.json, sources_hat.csv and scoring_trace.csv.',
    )
    add_config_options(parser)
    parser.add_argument('--data', type=Path, required=True, help='CSV with one mixture per row')
    add_output_options(parser)
    parser.set_defaults(handler=handle)


def handle(args: Namespace) -> int:
    cfg = resolve_config(args)
    X = TimeSeriesBlock(data=read_matrix(args.data))
    if X.data.shape != (cfg.dims.L, cfg.dims.T):
        raise DimensionError(
            f'{args.data}: expected {cfg.dims.L} x {cfg.dims.T} (L x T), found {X.data.shape[0]} x {X.data.shape[1]}',
        )
    spectra = source_spectra(cfg.sources, cfg.dims.T)
    obs = dft_forward(X)
    theta_hat, trace = fisher_scoring(obs, spectra, initialize(X, cfg.dims, cfg.scoring, spectra), cfg.scoring)
    logger.info('Fisher scoring stopped after %d iterations (%s)', trace.iterations, trace.reason)
    estimate = estimate_sources(theta_hat, obs, spectra)

    labels = parameter_labels(cfg.dims.L, cfg.dims.M)
    trace_table = ReportTable(columns=['iteration', 'log_likelihood', 'score_max_norm', 'step_size', *labels])
    for iteration, iterate in enumerate(trace.iterates):
        trace_table.add(iteration, iterate.log_likelihood, iterate.score_norm, iterate.step_size, *iterate.theta)

    out_dir = Path(args.out)
    outputs = [
        write_json(out_dir / 'theta_hat.json', {
            **theta_hat.dict(by_alias=True),
            'converged': trace.converged,
            'reason': trace.reason,
            'iterations': trace.iterations,
            'ridge_used': trace.ridge_used,
        }),
        write_matrix(out_dir / 'sources_hat.csv', estimate.S_hat),
        write_table(out_dir / 'scoring_trace.csv', trace_table),
    ]
    write_manifest(out_dir, 'estimate', cfg, outputs)
    if not trace.converged:
        logger.error('Fisher scoring did not converge: %s', trace.reason)
        return EXIT_NUMERICAL
    return EXIT_OK
