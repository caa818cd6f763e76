"""Source estimation from the mixtures given (true or estimated) model parameters.

Stationarity makes every block of the time-domain LMMSE operator C_sx C_x^-1 diagonal in the DFT
domain, so the estimate reduces to one M x L filter W_k = diag(P[k]) A^T C_k^-1 per retained bin.
"""
from typing import List

import numpy as np
from scipy import linalg

from src.core.exceptions import DimensionError, RankDeficiencyError
from src.models.estimate import MsePrediction, SourceEstimate
from src.models.signal import (FrequencyObservations, ModelParams, SpectralProfile, TimeSeriesBlock, bin_weights,
                               stack_spectra)
from src.services.likelihood import covariances_from_power
from src.services.signal_model import dft_inverse


def _power(params: ModelParams, spectra: List[SpectralProfile]) -> np.ndarray:
    power = stack_spectra(spectra)
    if power.shape[1] != params.M:
        raise DimensionError(f'{power.shape[1]} spectra given for M={params.M} sources')
    return power


def filters_from_power(params: ModelParams, power: np.ndarray) -> np.ndarray:
    cov = covariances_from_power(params, power)
    return power[:, :, np.newaxis] * (params.A.T[np.newaxis, :, :] @ cov.Cinv)


def lmmse_filter_bins(params: ModelParams, spectra: List[SpectralProfile]) -> np.ndarray:
    """W_k = diag(P[k]) A^T C_k^-1 for every retained bin, shape (n_bins, M, L)."""
    return filters_from_power(params, _power(params, spectra))


def estimate_sources(
        params: ModelParams,
        obs: FrequencyObservations,
        spectra: List[SpectralProfile],
) -> SourceEstimate:
    power = _power(params, spectra)
    if obs.n_bins != power.shape[0]:
        raise DimensionError(f'observations have T={obs.T} but spectra have T={spectra[0].T}')
    if obs.n_channels != params.L:
        raise DimensionError(f'observations have {obs.n_channels} channels, parameters expect L={params.L}')
    filters = filters_from_power(params, power)
    estimated = np.einsum('kml,lk->mk', filters, obs.bins)
    freq_bins = FrequencyObservations(bins=estimated, T=obs.T)
    return SourceEstimate(S_hat=dft_inverse(freq_bins).data, freq_bins=freq_bins, params_used=params)


def mse_prediction(
        params_assumed: ModelParams,
        params_true: ModelParams,
        spectra: List[SpectralProfile],
) -> MsePrediction:
    """Exact per-source MSE of the filter built from params_assumed on data generated by params_true.

    When both coincide this is the oracle MMSE bound P_m[k] - P_m[k]^2 (A^T C_k^-1 A)_mm per bin.
    """
    power = _power(params_assumed, spectra)
    if params_true.A.shape != params_assumed.A.shape:
        raise DimensionError(f'assumed A is {params_assumed.A.shape} but true A is {params_true.A.shape}')
    filters = filters_from_power(params_assumed, power)
    response = filters @ params_true.A - np.eye(params_assumed.M)[np.newaxis, :, :]
    per_bin = np.einsum('kmj,kj->km', response ** 2, power) + np.einsum('kml,l->km', filters ** 2, params_true.lam)
    per_bin = np.maximum(per_bin, 0.0).T
    T = 2 * (power.shape[0] - 1)
    per_source = 2.0 * (per_bin @ bin_weights(T)) / T
    return MsePrediction(per_source=per_source, per_bin=per_bin)


def maximally_separating_demix(A_hat: np.ndarray, X: TimeSeriesBlock) -> TimeSeriesBlock:
    """Memoryless zero-forcing estimate pinv(A_hat) X."""
    A_hat = np.atleast_2d(np.asarray(A_hat, dtype=float))
    if A_hat.shape[0] != X.n_channels:
        raise DimensionError(f'A_hat has {A_hat.shape[0]} rows but X has {X.n_channels} channels')
    _, singular_values, vt = linalg.svd(A_hat)
    tolerance = max(A_hat.shape) * np.finfo(float).eps * singular_values[0] if singular_values.size else 0.0
    rank = int(np.sum(singular_values > tolerance))
    if rank < A_hat.shape[1]:
        null_direction = vt[-1]
        involved = [str(column + 1) for column in np.flatnonzero(np.abs(null_direction) > 1e-8)]
        raise RankDeficiencyError(
            f'A_hat has rank {rank} < M={A_hat.shape[1]}; columns {", ".join(involved)} are linearly dependent',
        )
    return TimeSeriesBlock(data=linalg.pinv(A_hat) @ X.data)


def interference_to_source_ratio(demixer: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Per-source ratio of residual cross-talk power to own-source power of the global response demixer @ A."""
    response = np.asarray(demixer, dtype=float) @ np.asarray(A, dtype=float)
    if response.shape[0] != response.shape[1]:
        raise DimensionError(f'demixer @ A must be square, found {response.shape}')
    own = np.diag(response) ** 2
    interference = (response ** 2).sum(axis=1) - own
    return interference / own


def bit_decisions(S_hat: np.ndarray) -> np.ndarray:
    """Threshold rule for centered on-off keying: +1 above zero, -1 otherwise."""
    return np.where(np.asarray(S_hat) > 0, 1.0, -1.0)
