"""Data model of the mixtures: spectra, generators, mixing and the normalized DFT.

The DFT used throughout is F[k, t] = T^(-1/2) exp(-j 2 pi k t / T) (0-based k and t), and only the
first T/2 + 1 bins are kept; the rest are conjugates of bins 1..T/2-1.
"""
import logging
from typing import List, Sequence

import numpy as np
from scipy import signal

from src.core.exceptions import DegenerateProcessError, DimensionError, SignalValidationError, StabilityError
from src.models.experiment import SourceSpec
from src.models.signal import FrequencyObservations, SpectralProfile, TimeSeriesBlock

logger = logging.getLogger(__name__)

TELEGRAPH_BURN_IN = 1000
REAL_BIN_TOLERANCE = 1e-9


def _check_even(T: int) -> None:
    if T < 4 or T % 2:
        raise DimensionError(f'T must be an even integer ≥ 4, got {T}')


def dft_forward(x: TimeSeriesBlock) -> FrequencyObservations:
    _check_even(x.T)
    bins = np.fft.rfft(x.data, axis=1, norm='ortho')
    # DC and Nyquist are real for real input
    bins[:, 0] = bins[:, 0].real
    bins[:, -1] = bins[:, -1].real
    return FrequencyObservations(bins=bins, T=x.T)


def dft_inverse(f: FrequencyObservations) -> TimeSeriesBlock:
    real_bins = f.bins[:, [0, -1]]
    scale = max(1.0, float(np.abs(f.bins).max(initial=0.0)))
    if np.any(np.abs(real_bins.imag) > REAL_BIN_TOLERANCE * scale):
        raise SignalValidationError('DC and Nyquist bins must be real-valued')
    return TimeSeriesBlock(data=np.fft.irfft(f.bins, n=f.T, axis=1, norm='ortho'))


def ar1_spectrum(a: float, T: int) -> SpectralProfile:
    if not -1.0 < a < 1.0:
        raise StabilityError(f'AR(1) parameter must satisfy |a| < 1, got {a}')
    _check_even(T)
    omega = 2 * np.pi * np.arange(T) / T
    values = (1 - a ** 2) / (1 - 2 * a * np.cos(omega) + a ** 2)
    return SpectralProfile(values=values)


def telegraph_spectrum(alpha_switch: float, T: int) -> SpectralProfile:
    """Spectrum of the centered telegraph process, whose lag-tau correlation is (1 - 2 alpha)^|tau|."""
    if not 0.0 < alpha_switch < 1.0:
        raise DegenerateProcessError(f'switch probability must lie in (0, 1), got {alpha_switch}')
    return ar1_spectrum(1 - 2 * alpha_switch, T)


def flat_spectrum(power: float, T: int) -> SpectralProfile:
    _check_even(T)
    return SpectralProfile(values=np.full(T, float(power)))


def source_spectrum(spec: SourceSpec, T: int) -> SpectralProfile:
    if spec.kind == 'ar1':
        return ar1_spectrum(spec.a, T)
    if spec.kind == 'telegraph':
        return telegraph_spectrum(spec.switch_probability, T)
    if spec.kind == 'flat':
        return flat_spectrum(spec.power, T)
    if len(spec.values) != T:
        raise DimensionError(f'explicit spectrum has {len(spec.values)} bins, expected T={T}')
    return SpectralProfile(values=spec.values)


def source_spectra(specs: Sequence[SourceSpec], T: int) -> List[SpectralProfile]:
    return [source_spectrum(spec, T) for spec in specs]


def generate_ar1(a: float, T: int, rng: np.random.Generator) -> TimeSeriesBlock:
    """Unit-variance Gaussian AR(1) path s[t] = a s[t-1] + e[t], stationary from the first sample."""
    if not -1.0 < a < 1.0:
        raise StabilityError(f'AR(1) parameter must satisfy |a| < 1, got {a}')
    innovations = rng.standard_normal(T) * np.sqrt(1 - a ** 2)
    innovations[0] /= np.sqrt(1 - a ** 2)
    return TimeSeriesBlock(data=signal.lfilter([1.0], [1.0, -a], innovations))


def generate_telegraph(alpha_switch: float, T: int, rng: np.random.Generator) -> TimeSeriesBlock:
    """Two-state Markov path over {0, 2} that flips with probability alpha_switch at every step."""
    if not 0.0 < alpha_switch < 1.0:
        raise DegenerateProcessError(f'switch probability must lie in (0, 1), got {alpha_switch}')
    initial = rng.integers(0, 2)
    flips = rng.random(T + TELEGRAPH_BURN_IN) < alpha_switch
    states = (initial + np.cumsum(flips)) % 2
    return TimeSeriesBlock(data=2.0 * states[TELEGRAPH_BURN_IN:])


def center_telegraph(S: TimeSeriesBlock) -> TimeSeriesBlock:
    return TimeSeriesBlock(data=S.data - 1.0)


def generate_source(spec: SourceSpec, T: int, rng: np.random.Generator) -> TimeSeriesBlock:
    if spec.kind == 'ar1':
        return generate_ar1(spec.a, T, rng)
    if spec.kind == 'telegraph':
        return generate_telegraph(spec.switch_probability, T, rng)
    raise DimensionError(f'no generator for source kind {spec.kind!r}; use ar1 or telegraph')


def generate_sources(specs: Sequence[SourceSpec], T: int, rng: np.random.Generator) -> TimeSeriesBlock:
    return TimeSeriesBlock(data=np.vstack([generate_source(spec, T, rng).data for spec in specs]))


def mix_and_observe(
        A: np.ndarray,
        S: TimeSeriesBlock,
        lam: np.ndarray,
        rng: np.random.Generator,
) -> TimeSeriesBlock:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    lam = np.asarray(lam, dtype=float)
    if A.shape[1] != S.n_channels:
        raise DimensionError(f'A has {A.shape[1]} columns but S has {S.n_channels} rows')
    if lam.shape != (A.shape[0],):
        raise DimensionError(f'expected {A.shape[0]} noise variances, found {lam.size}')
    if np.any(lam < 0):
        raise SignalValidationError('noise variances must be nonnegative')
    noise = np.sqrt(lam)[:, np.newaxis] * rng.standard_normal((A.shape[0], S.T))
    return TimeSeriesBlock(data=A @ S.data + noise)


def noise_variances_from_db(levels_db: Sequence[float]) -> np.ndarray:
    return 10.0 ** (np.asarray(levels_db, dtype=float) / 10.0)


def received_source_power(A: np.ndarray, spectra: Sequence[SpectralProfile]) -> float:
    """Sensor-averaged power of the noiseless mixtures, mean over l of (A C_s A^T)_ll."""
    variances = np.array([spectrum.variance for spectrum in spectra])
    return float(np.mean((np.asarray(A) ** 2) @ variances))


def noise_variance_for_snr(A: np.ndarray, spectra: Sequence[SpectralProfile], snr_db: float) -> float:
    return received_source_power(A, spectra) / 10.0 ** (snr_db / 10.0)
