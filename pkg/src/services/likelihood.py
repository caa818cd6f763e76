"""Frequency-domain Gaussian (quasi-)likelihood of the noisy mixtures and its score.

Every retained bin k contributes alpha_k (log det C_k^-1 - Tr(Chi[k] C_k^-1)) with
C_k = A diag(P[k]) A^T + diag(lambda). Since A, P and lambda are real, the likelihood depends on
Chi[k] only through Re{Chi[k]}, so the functions below work on the stacked real scatter matrices
of shape (n_bins, L, L) and the public wrappers build them from FrequencyObservations.
"""
from typing import List

import numpy as np
from pydantic import validator

from src.core.exceptions import DimensionError, NotPositiveDefiniteError, NumericalError
from src.models.base import ArrayModel
from src.models.signal import FrequencyObservations, ModelParams, SpectralProfile, bin_weights, stack_spectra

WOODBURY_MIN_POWER = 1e-12
WOODBURY_MIN_NOISE_RATIO = 1e-6


class PerFrequencyCovariance(ArrayModel):
    C: np.ndarray
    Cinv: np.ndarray
    logdet: np.ndarray

    @validator('C', 'Cinv')
    def stacked_square(cls, value: np.ndarray) -> np.ndarray:
        if value.ndim != 3 or value.shape[1] != value.shape[2]:
            raise ValueError(f'expected (n_bins, L, L), got {value.shape}')
        return value


class ScoreVector(ArrayModel):
    values: np.ndarray

    @property
    def max_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


def _check_dimensions(params: ModelParams, power: np.ndarray) -> None:
    if power.shape[1] != params.M:
        raise DimensionError(f'{power.shape[1]} spectra given for M={params.M} sources')


def _woodbury_batch(A: np.ndarray, lam: np.ndarray, power: np.ndarray) -> np.ndarray:
    """C_k^-1 = L^-1 - L^-1 A (P_k^-1 + A^T L^-1 A)^-1 A^T L^-1 for every row of `power`."""
    if np.any(lam <= 0):
        raise NumericalError('Woodbury inverse needs strictly positive noise variances')
    scaled = A / lam[:, np.newaxis]
    gram = A.T @ scaled
    inner = gram[np.newaxis, :, :] + np.stack([np.diag(1.0 / p) for p in power])
    try:
        inner_inv = np.linalg.inv(inner)
    except np.linalg.LinAlgError as exc:
        raise NumericalError('singular M x M system in the Woodbury inverse') from exc
    Cinv = np.diag(1.0 / lam)[np.newaxis, :, :] - scaled @ inner_inv @ scaled.T
    return 0.5 * (Cinv + Cinv.transpose(0, 2, 1))


def woodbury_inverse(params: ModelParams, spectrum_at_k: np.ndarray) -> np.ndarray:
    spectrum_at_k = np.asarray(spectrum_at_k, dtype=float)
    if spectrum_at_k.shape != (params.M,):
        raise DimensionError(f'expected {params.M} source powers, found {spectrum_at_k.size}')
    if np.any(spectrum_at_k <= WOODBURY_MIN_POWER):
        # the Woodbury form needs P_k^-1; zero-power sources drop out of C_k
        active = spectrum_at_k > WOODBURY_MIN_POWER
        if not np.any(active):
            return np.diag(1.0 / params.lam)
        return _woodbury_batch(params.A[:, active], params.lam, spectrum_at_k[np.newaxis, active])[0]
    return _woodbury_batch(params.A, params.lam, spectrum_at_k[np.newaxis, :])[0]


def covariance_stack(params: ModelParams, power: np.ndarray) -> np.ndarray:
    """C_k for every row of the (n_bins, M) power array."""
    C = np.einsum('lm,km,jm->klj', params.A, power, params.A)
    C += np.diag(params.lam)[np.newaxis, :, :]
    return C


def model_covariances(params: ModelParams, spectra: List[SpectralProfile]) -> PerFrequencyCovariance:
    power = stack_spectra(spectra)
    _check_dimensions(params, power)
    return covariances_from_power(params, power)


def _cholesky_stack(C: np.ndarray) -> np.ndarray:
    min_eig = np.linalg.eigvalsh(C)[:, 0]
    scale = np.abs(C).max(axis=(1, 2))
    bad = np.flatnonzero(~(min_eig > 1e-14 * scale))
    if bad.size:
        k = int(bad[0])
        raise NotPositiveDefiniteError(f'C_k is not positive definite at bin {k} (min eigenvalue {min_eig[k]:.3e})', k)
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError as exc:
        k = int(np.argmin(min_eig))
        raise NotPositiveDefiniteError(f'Cholesky factorization of C_k failed at bin {k}', k) from exc


def _woodbury_bins(params: ModelParams, power: np.ndarray) -> np.ndarray:
    """Bins where the Woodbury form is both defined and accurate."""
    if params.M >= params.L:
        return np.zeros(power.shape[0], dtype=bool)
    signal_scale = np.einsum('lm,km,lm->k', params.A, power, params.A)
    well_conditioned = params.lam.min() >= WOODBURY_MIN_NOISE_RATIO * signal_scale
    return np.all(power > WOODBURY_MIN_POWER, axis=1) & well_conditioned & (params.lam.min() > 0)


def covariances_from_power(params: ModelParams, power: np.ndarray) -> PerFrequencyCovariance:
    C = covariance_stack(params, power)
    chol = _cholesky_stack(C)
    logdet = 2.0 * np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)

    # bins outside the Woodbury range invert through the Cholesky factor that gives the log-determinant
    use_woodbury = _woodbury_bins(params, power)
    Cinv = np.empty_like(C)
    if np.any(use_woodbury):
        Cinv[use_woodbury] = _woodbury_batch(params.A, params.lam, power[use_woodbury])
    if np.any(~use_woodbury):
        lower_inv = np.linalg.inv(chol[~use_woodbury])
        direct = lower_inv.transpose(0, 2, 1) @ lower_inv
        Cinv[~use_woodbury] = 0.5 * (direct + direct.transpose(0, 2, 1))
    return PerFrequencyCovariance(C=C, Cinv=Cinv, logdet=logdet)


def population_scatter(params: ModelParams, spectra: List[SpectralProfile]) -> np.ndarray:
    """Expected Re{Chi[k]} under params, i.e. C_k itself."""
    power = stack_spectra(spectra)
    _check_dimensions(params, power)
    return covariance_stack(params, power)


def _check_scatter(params: ModelParams, scatter: np.ndarray, power: np.ndarray) -> None:
    if scatter.shape != (power.shape[0], params.L, params.L):
        raise DimensionError(
            f'expected scatter of shape {(power.shape[0], params.L, params.L)}, found {scatter.shape}',
        )


def scatter_log_likelihood(params: ModelParams, scatter: np.ndarray, power: np.ndarray) -> float:
    _check_dimensions(params, power)
    _check_scatter(params, scatter, power)
    cov = covariances_from_power(params, power)
    alpha = bin_weights(2 * (power.shape[0] - 1))
    trace = np.einsum('kij,kji->k', scatter, cov.Cinv)
    return float(np.sum(alpha * (-cov.logdet - trace)))


def scatter_score(params: ModelParams, scatter: np.ndarray, power: np.ndarray) -> ScoreVector:
    """Analytic gradient of the log-likelihood ordered as [vec(A); lambda].

    With Q_k = C_k^-1 Re{Chi[k]} C_k^-1 - C_k^-1 the score is
    dL/dA = 2 sum_k alpha_k Q_k A diag(P[k]) and dL/dlambda_l = sum_k alpha_k (Q_k)_ll.
    """
    _check_dimensions(params, power)
    _check_scatter(params, scatter, power)
    cov = covariances_from_power(params, power)
    alpha = bin_weights(2 * (power.shape[0] - 1))
    Q = cov.Cinv @ scatter @ cov.Cinv - cov.Cinv
    weighted = alpha[:, np.newaxis, np.newaxis] * Q
    grad_A = 2.0 * np.einsum('kil,lj,kj->ij', weighted, params.A, power)
    grad_lam = np.einsum('kll->l', weighted)
    return ScoreVector(values=np.concatenate([grad_A.ravel(order='F'), grad_lam]))


def log_likelihood(params: ModelParams, obs: FrequencyObservations, spectra: List[SpectralProfile]) -> float:
    power = stack_spectra(spectra)
    _check_observations(obs, power)
    return scatter_log_likelihood(params, obs.real_scatter(), power)


def score(params: ModelParams, obs: FrequencyObservations, spectra: List[SpectralProfile]) -> ScoreVector:
    power = stack_spectra(spectra)
    _check_observations(obs, power)
    return scatter_score(params, obs.real_scatter(), power)


def likelihood_equations_residual(
        params: ModelParams,
        obs: FrequencyObservations,
        spectra: List[SpectralProfile],
) -> float:
    return score(params, obs, spectra).max_norm


def _check_observations(obs: FrequencyObservations, power: np.ndarray) -> None:
    if obs.n_bins != power.shape[0]:
        raise DimensionError(f'observations have T={obs.T} but spectra have T={2 * (power.shape[0] - 1)}')
