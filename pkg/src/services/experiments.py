"""Monte-Carlo harnesses for the parameter-estimation, sample-size, VLC bit-error and QML studies."""
import logging
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor, as_completed
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Type

import numpy as np

from src.core import config
from src.core.exceptions import ExperimentError
from src.models.experiment import (AggregateReport, AggregateStat, ExperimentConfig, ExperimentReport, ReportTable,
                                   TrialOutcome)
from src.models.signal import Dimensions, ModelParams, SpectralProfile, TimeSeriesBlock
from src.services.fisher import (crlb, fisher_scoring, initialize, parameter_labels, resolve_sign,
                                 resolve_sign_nonnegative)
from src.services.likelihood import score
from src.services.mmse import bit_decisions, estimate_sources, mse_prediction
from src.services.signal_model import (center_telegraph, dft_forward, generate_sources, mix_and_observe,
                                       noise_variance_for_snr, source_spectra)

logger = logging.getLogger(__name__)

AGGREGATED_FIELDS = ('theta_sq_err', 'source_sq_err', 'oracle_sq_err', 'bit_errors', 'oracle_bit_errors', 'score')


def to_db(value):
    with np.errstate(divide='ignore'):
        return 10.0 * np.log10(value)


def trial_rng(master_seed: int, grid_index: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(grid_index, trial_index)))


def aggregate(trials: Sequence[TrialOutcome]) -> AggregateReport:
    """Means and standard errors over the converged trials; non-converged trials are only counted."""
    if not trials:
        raise ExperimentError('no trials to aggregate')
    kept = [trial for trial in trials if trial.converged]
    if not kept:
        raise ExperimentError(f'none of the {len(trials)} trials converged')
    report = AggregateReport(n_trials=len(trials), n_excluded=len(trials) - len(kept))
    for field in AGGREGATED_FIELDS:
        values = [getattr(trial, field) for trial in kept]
        if any(value is None for value in values):
            continue
        stacked = np.vstack([np.atleast_1d(np.asarray(value, dtype=float)) for value in values])
        count = stacked.shape[0]
        stderr = stacked.std(axis=0, ddof=1) / np.sqrt(count) if count > 1 else np.zeros(stacked.shape[1])
        report.stats[field] = AggregateStat(mean=stacked.mean(axis=0), stderr=stderr, count=count)
    return report


class ExperimentService(ABC):
    """Runs independent trials on a thread pool and turns their aggregate into report tables."""

    def __init__(self, cfg: ExperimentConfig, threads: Optional[int] = None):
        self.cfg = cfg
        self.threads = threads or config.THREADS
        self.truth_A = cfg.A

    @abstractmethod
    def run(self) -> ExperimentReport:
        """Runs every grid point and builds the report tables."""

    def _run_trials(self, trial: Callable[[int, np.random.Generator], TrialOutcome], grid_index: int = 0):
        outcomes: List[TrialOutcome] = []
        with ThreadPoolExecutor(self.threads) as executor:
            futures = {
                executor.submit(trial, index, trial_rng(self.cfg.seed, grid_index, index)): index
                for index in range(self.cfg.trials)
            }
            for future in as_completed(futures):
                outcome = future.result()
                if not outcome.converged:
                    logger.info('trial %d did not converge after %d iterations, excluded',
                                outcome.index, outcome.iterations)
                outcomes.append(outcome)
        return sorted(outcomes, key=lambda outcome: outcome.index)

    def _estimate(self, X: TimeSeriesBlock, spectra: List[SpectralProfile]):
        dims = Dimensions(M=self.cfg.dims.M, L=self.cfg.dims.L, T=X.T)
        obs = dft_forward(X)
        init = initialize(X, dims, self.cfg.scoring, spectra)
        theta_hat, trace = fisher_scoring(obs, spectra, init, self.cfg.scoring)
        return obs, theta_hat, trace

    def _estimation_trial(self, index: int, rng: np.random.Generator, T: int, truth: ModelParams,
                          spectra: List[SpectralProfile]) -> TrialOutcome:
        S = generate_sources(self.cfg.sources, T, rng)
        X = mix_and_observe(truth.A, S, truth.lam, rng)
        obs, theta_hat, trace = self._estimate(X, spectra)
        if not trace.converged:
            return TrialOutcome(index=index, converged=False, iterations=trace.iterations)
        signed = theta_hat.with_mixing(resolve_sign(theta_hat.A, truth.A))
        ml_estimate = estimate_sources(signed, obs, spectra).S_hat
        oracle_estimate = estimate_sources(truth, obs, spectra).S_hat
        return TrialOutcome(
            index=index,
            converged=True,
            iterations=trace.iterations,
            theta_hat=signed,
            theta_sq_err=(signed.to_vector() - truth.to_vector()) ** 2,
            source_sq_err=np.mean((ml_estimate - S.data) ** 2, axis=1),
            oracle_sq_err=np.mean((oracle_estimate - S.data) ** 2, axis=1),
        )

    def _summary(self, aggregated: AggregateReport, **extra) -> dict:
        return {
            'experiment': self.cfg.name,
            'seed': self.cfg.seed,
            'trials': aggregated.n_trials,
            'excluded': aggregated.n_excluded,
            'exclusion_rate': aggregated.exclusion_rate,
            **extra,
        }


class ParameterEstimationExperiment(ExperimentService):
    """CRLB vs empirical ML MSE of theta and MMSE bound vs empirical source MSE at one sample size."""

    def run(self) -> ExperimentReport:
        T = self.cfg.dims.T
        truth = self.cfg.true_params()
        spectra = source_spectra(self.cfg.sources, T)
        logger.info('%s: %d trials, T=%d', self.cfg.name, self.cfg.trials, T)
        bound = crlb(truth, spectra)
        mmse_bound = mse_prediction(truth, truth, spectra).per_source

        outcomes = self._run_trials(lambda index, rng: self._estimation_trial(index, rng, T, truth, spectra))
        aggregated = aggregate(outcomes)

        parameters = ReportTable(columns=[
            'parameter', 'crlb', 'crlb_db', 'empirical_mse', 'empirical_mse_db', 'stderr', 'deviation_db',
        ])
        theta_stat = aggregated.stats['theta_sq_err']
        deviations = to_db(theta_stat.mean) - to_db(bound.diagonal())
        for label, bound_value, mse, stderr, deviation in zip(
                parameter_labels(truth.L, truth.M), bound.diagonal(), theta_stat.mean, theta_stat.stderr, deviations,
        ):
            parameters.add(label, bound_value, to_db(bound_value), mse, to_db(mse), stderr, deviation)

        sources = ReportTable(columns=[
            'source', 'mmse_bound', 'mmse_bound_db', 'empirical_mse', 'empirical_mse_db', 'stderr',
            'oracle_empirical_mse_db', 'gap_db',
        ])
        ml_stat = aggregated.stats['source_sq_err']
        oracle_stat = aggregated.stats['oracle_sq_err']
        for m in range(truth.M):
            sources.add(
                m + 1, mmse_bound[m], to_db(mmse_bound[m]), ml_stat.mean[m], to_db(ml_stat.mean[m]),
                ml_stat.stderr[m], to_db(oracle_stat.mean[m]), to_db(ml_stat.mean[m]) - to_db(mmse_bound[m]),
            )
        summary = self._summary(
            aggregated,
            T=T,
            max_deviation_db=float(np.max(np.abs(deviations))),
            crlb_condition_number=bound.condition_number,
            crlb_pseudo_inverse=bound.pseudo_inverse,
        )
        logger.info('%s: max |MSE - CRLB| = %.2f dB, %d trials excluded',
                    self.cfg.name, summary['max_deviation_db'], aggregated.n_excluded)
        return ExperimentReport(name=self.cfg.name, tables={'parameters': parameters, 'sources': sources},
                                summary=summary)


class SampleSizeExperiment(ExperimentService):
    """Empirical ML-based MMSE source MSE against the MMSE bound over a grid of sample sizes."""

    def run(self) -> ExperimentReport:
        truth = self.cfg.true_params()
        grid = self.cfg.T_grid or [self.cfg.dims.T]
        table = ReportTable(columns=[
            'T', 'source', 'mmse_bound', 'mmse_bound_db', 'empirical_mse', 'empirical_mse_db', 'stderr', 'gap_db',
        ])
        gaps = np.zeros((len(grid), truth.M))
        excluded = {}
        for grid_index, T in enumerate(grid):
            logger.info('%s: T=%d, %d trials', self.cfg.name, T, self.cfg.trials)
            spectra = source_spectra(self.cfg.sources, T)
            bound = mse_prediction(truth, truth, spectra).per_source
            outcomes = self._run_trials(
                lambda index, rng, T=T, spectra=spectra: self._estimation_trial(index, rng, T, truth, spectra),
                grid_index,
            )
            aggregated = aggregate(outcomes)
            excluded[str(T)] = aggregated.n_excluded
            stat = aggregated.stats['source_sq_err']
            gaps[grid_index] = to_db(stat.mean) - to_db(bound)
            for m in range(truth.M):
                table.add(T, m + 1, bound[m], to_db(bound[m]), stat.mean[m], to_db(stat.mean[m]), stat.stderr[m],
                          gaps[grid_index, m])
        decreasing = [bool(np.all(np.diff(gaps[:, m]) < 0)) for m in range(truth.M)]
        summary = {
            'experiment': self.cfg.name,
            'seed': self.cfg.seed,
            'trials': self.cfg.trials,
            'T_grid': list(grid),
            'excluded': excluded,
            'gap_decreasing': decreasing,
        }
        return ExperimentReport(name=self.cfg.name, tables={'mse_vs_T': table}, summary=summary)


class BitErrorExperiment(ExperimentService):
    """BER of the QML-based LMMSE receiver and of the oracle LMMSE receiver over an SNR grid."""

    def run(self) -> ExperimentReport:
        T = self.cfg.dims.T
        spectra = source_spectra(self.cfg.sources, T)
        grid = self.cfg.noise.snr_db
        if grid is None:
            raise ExperimentError('the bit-error experiment needs noise.snr_db')
        table = ReportTable(columns=[
            'snr_db', 'noise_variance', 'source', 'receiver', 'errors', 'bits', 'ber', 'stderr',
        ])
        bers = {'qml': np.zeros((len(grid), self.cfg.dims.M)), 'oracle': np.zeros((len(grid), self.cfg.dims.M))}
        zero_error_points = []
        excluded = {}
        for grid_index, snr_db in enumerate(grid):
            variance = noise_variance_for_snr(self.truth_A, spectra, snr_db)
            truth = ModelParams(A=self.truth_A, lam=np.full(self.cfg.dims.L, variance))
            logger.info('%s: SNR %.1f dB (noise variance %.3e), %d trials', self.cfg.name, snr_db, variance,
                        self.cfg.trials)
            outcomes = self._run_trials(
                lambda index, rng, truth=truth: self._bit_error_trial(index, rng, T, truth, spectra),
                grid_index,
            )
            aggregated = aggregate(outcomes)
            excluded[str(snr_db)] = aggregated.n_excluded
            kept = aggregated.stats['bit_errors'].count
            for receiver, field in (('qml', 'bit_errors'), ('oracle', 'oracle_bit_errors')):
                stat = aggregated.stats[field]
                for m in range(self.cfg.dims.M):
                    errors = int(round(stat.mean[m] * kept))
                    ber = stat.mean[m] / T
                    bers[receiver][grid_index, m] = ber
                    table.add(snr_db, variance, m + 1, receiver, errors, kept * T, ber, stat.stderr[m] / T)
                    if errors == 0:
                        zero_error_points.append({'snr_db': snr_db, 'source': m + 1, 'receiver': receiver,
                                                  'bits': kept * T})
        summary = {
            'experiment': self.cfg.name,
            'seed': self.cfg.seed,
            'trials_per_point': self.cfg.trials,
            'T': T,
            'snr_definition': 'mean over sensors of (A C_s A^T)_ll divided by the common noise variance',
            'excluded': excluded,
            'zero_error_points': zero_error_points,
            'ber_nonincreasing': {
                receiver: [bool(np.all(np.diff(values[:, m]) <= 0)) for m in range(self.cfg.dims.M)]
                for receiver, values in bers.items()
            },
        }
        return ExperimentReport(name=self.cfg.name, tables={'ber': table}, summary=summary)

    def _bit_error_trial(self, index: int, rng: np.random.Generator, T: int, truth: ModelParams,
                         spectra: List[SpectralProfile]) -> TrialOutcome:
        S = generate_sources(self.cfg.sources, T, rng)
        X = mix_and_observe(truth.A, S, truth.lam, rng)
        # receivers see the intensity offset; the empirical row means are removed before estimation
        X = TimeSeriesBlock(data=X.data - X.data.mean(axis=1, keepdims=True))
        obs, theta_hat, trace = self._estimate(X, spectra)
        if not trace.converged:
            return TrialOutcome(index=index, converged=False, iterations=trace.iterations)
        oriented = theta_hat.with_mixing(resolve_sign_nonnegative(theta_hat.A))
        bits = center_telegraph(S).data
        qml_bits = bit_decisions(estimate_sources(oriented, obs, spectra).S_hat)
        oracle_bits = bit_decisions(estimate_sources(truth, obs, spectra).S_hat)
        return TrialOutcome(
            index=index,
            converged=True,
            iterations=trace.iterations,
            theta_hat=oriented,
            bit_errors=np.sum(qml_bits != bits, axis=1),
            oracle_bit_errors=np.sum(oracle_bits != bits, axis=1),
            n_bits=T,
        )


class QuasiLikelihoodConsistency(ExperimentService):
    """Trial-averaged score at the true parameters for telegraph (non-Gaussian) sources.

    The score is divided by T/2 so that it estimates the per-bin mean of the quasi-likelihood
    equations, which should vanish as T grows.
    """

    def run(self) -> ExperimentReport:
        truth = self.cfg.true_params()
        grid = self.cfg.T_grid or [self.cfg.dims.T]
        table = ReportTable(columns=['T', 'parameter', 'mean_score', 'stderr'])
        max_scores = []
        for grid_index, T in enumerate(grid):
            logger.info('%s: T=%d, %d trials', self.cfg.name, T, self.cfg.trials)
            spectra = source_spectra(self.cfg.sources, T)
            outcomes = self._run_trials(
                lambda index, rng, T=T, spectra=spectra: self._score_trial(index, rng, T, truth, spectra),
                grid_index,
            )
            stat = aggregate(outcomes).stats['score']
            max_scores.append(float(np.max(np.abs(stat.mean))))
            for label, mean, stderr in zip(parameter_labels(truth.L, truth.M), stat.mean, stat.stderr):
                table.add(T, label, mean, stderr)
        summary = {
            'experiment': self.cfg.name,
            'seed': self.cfg.seed,
            'trials': self.cfg.trials,
            'T_grid': list(grid),
            'max_abs_mean_score': max_scores,
        }
        return ExperimentReport(name=self.cfg.name, tables={'mean_score': table}, summary=summary)

    def _score_trial(self, index: int, rng: np.random.Generator, T: int, truth: ModelParams,
                     spectra: List[SpectralProfile]) -> TrialOutcome:
        S = center_telegraph(generate_sources(self.cfg.sources, T, rng))
        obs = dft_forward(mix_and_observe(truth.A, S, truth.lam, rng))
        return TrialOutcome(index=index, converged=True, score=score(truth, obs, spectra).values / (T / 2))


EXPERIMENTS: Dict[str, Type[ExperimentService]] = {
    'exp1a': ParameterEstimationExperiment,
    'exp1b': SampleSizeExperiment,
    'exp2': ParameterEstimationExperiment,
    'exp3': BitErrorExperiment,
    'qml': QuasiLikelihoodConsistency,
}


@lru_cache()
def get_experiment_service(name: str) -> Type[ExperimentService]:
    if name not in EXPERIMENTS:
        raise ExperimentError(f'unknown experiment {name!r}; choose one of {", ".join(EXPERIMENTS)}')
    return EXPERIMENTS[name]


def run_experiment1_part1(cfg: ExperimentConfig, threads: Optional[int] = None) -> ExperimentReport:
    return ParameterEstimationExperiment(cfg, threads).run()


def run_experiment1_part2(cfg: ExperimentConfig, threads: Optional[int] = None) -> ExperimentReport:
    return SampleSizeExperiment(cfg, threads).run()


def run_experiment2(cfg: ExperimentConfig, threads: Optional[int] = None) -> ExperimentReport:
    return ParameterEstimationExperiment(cfg, threads).run()


def run_experiment3(cfg: ExperimentConfig, threads: Optional[int] = None) -> ExperimentReport:
    return BitErrorExperiment(cfg, threads).run()


def run_quasi_likelihood_consistency(cfg: ExperimentConfig, threads: Optional[int] = None) -> ExperimentReport:
    return QuasiLikelihoodConsistency(cfg, threads).run()
