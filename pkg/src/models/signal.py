from typing import List

import numpy as np
from pydantic import Field, root_validator, validator

from src.models.base import ArrayModel, as_float_array


class Dimensions(ArrayModel):
    M: int = Field(..., ge=1, description='Number of sources')
    L: int = Field(..., ge=1, description='Number of sensors')
    T: int = Field(..., ge=4, description='Number of samples')

    @validator('T')
    def even_sample_count(cls, value: int) -> int:
        if value % 2:
            raise ValueError('T must be even')
        return value

    @root_validator(skip_on_failure=True)
    def sensors_cover_sources(cls, values):
        if values['L'] < values['M']:
            raise ValueError('L must be ≥ M')
        return values

    @property
    def n_bins(self) -> int:
        return self.T // 2 + 1

    @property
    def n_params(self) -> int:
        return self.M * self.L + self.L


class SpectralProfile(ArrayModel):
    """Power spectral density of one source sampled at the T DFT bins."""

    values: np.ndarray

    @validator('values', pre=True)
    def nonnegative_symmetric(cls, value) -> np.ndarray:
        values = as_float_array(value, 1, 'spectrum')
        if values.size < 4 or values.size % 2:
            raise ValueError(f'spectrum length must be even and at least 4, got {values.size}')
        if np.any(values < 0):
            raise ValueError('spectrum must be nonnegative')
        mirrored = values[1:][::-1]
        if not np.allclose(values[1:], mirrored, rtol=1e-10, atol=1e-12):
            raise ValueError('spectrum of a real source must satisfy values[k] = values[T-k]')
        return values

    @property
    def T(self) -> int:
        return self.values.size

    @property
    def variance(self) -> float:
        return float(self.values.mean())

    def retained(self) -> np.ndarray:
        return self.values[:self.T // 2 + 1]


def stack_spectra(spectra: List[SpectralProfile]) -> np.ndarray:
    """Retained bins of all sources as an (n_bins, M) array."""
    if not spectra:
        raise ValueError('at least one spectrum is required')
    lengths = {spectrum.T for spectrum in spectra}
    if len(lengths) != 1:
        raise ValueError(f'spectra have different lengths: {sorted(lengths)}')
    return np.stack([spectrum.retained() for spectrum in spectra], axis=1)


class ModelParams(ArrayModel):
    """theta = [vec(A); lambda] with vec stacking the columns of A."""

    A: np.ndarray
    lam: np.ndarray = Field(..., alias='lambda')

    @validator('A', pre=True)
    def mixing_matrix(cls, value) -> np.ndarray:
        return as_float_array(value, 2, 'A')

    @validator('lam', pre=True)
    def noise_variances(cls, value) -> np.ndarray:
        lam = as_float_array(value, 1, 'lambda')
        if np.any(lam < 0):
            raise ValueError('noise variances must be nonnegative')
        return lam

    @root_validator(skip_on_failure=True)
    def consistent_sensors(cls, values):
        if values['A'].shape[0] != values['lam'].size:
            raise ValueError(f'A has {values["A"].shape[0]} rows but lambda has {values["lam"].size} entries')
        return values

    @property
    def L(self) -> int:
        return self.A.shape[0]

    @property
    def M(self) -> int:
        return self.A.shape[1]

    @property
    def n_params(self) -> int:
        return self.L * self.M + self.L

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.A.ravel(order='F'), self.lam])

    @classmethod
    def from_vector(cls, theta: np.ndarray, L: int, M: int) -> 'ModelParams':
        theta = np.asarray(theta, dtype=float)
        if theta.size != L * M + L:
            raise ValueError(f'theta must have {L * M + L} entries, got {theta.size}')
        return cls(A=np.ascontiguousarray(theta[:L * M].reshape((L, M), order='F')), lam=theta[L * M:])

    def with_mixing(self, A: np.ndarray) -> 'ModelParams':
        return ModelParams(A=A, lam=self.lam)


class TimeSeriesBlock(ArrayModel):
    """R x T real matrix, one channel per row."""

    data: np.ndarray

    @validator('data', pre=True)
    def real_rows(cls, value) -> np.ndarray:
        data = np.array(value, dtype=float)
        if data.ndim == 1:
            data = data[np.newaxis, :]
        return as_float_array(data, 2, 'time series')

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def T(self) -> int:
        return self.data.shape[1]


class FrequencyObservations(ArrayModel):
    """First T/2+1 normalized-DFT bins of every channel, stored as (channels, n_bins)."""

    bins: np.ndarray
    T: int

    @validator('bins', pre=True)
    def complex_bins(cls, value) -> np.ndarray:
        bins = np.array(value, dtype=complex)
        if bins.ndim == 1:
            bins = bins[np.newaxis, :]
        if bins.ndim != 2:
            raise ValueError(f'bins must be 2-dimensional, got shape {bins.shape}')
        return bins

    @root_validator(skip_on_failure=True)
    def retained_bin_count(cls, values):
        T = values['T']
        if T % 2:
            raise ValueError('T must be even')
        if values['bins'].shape[1] != T // 2 + 1:
            raise ValueError(f'expected {T // 2 + 1} bins for T={T}, got {values["bins"].shape[1]}')
        return values

    @property
    def n_bins(self) -> int:
        return self.T // 2 + 1

    @property
    def n_channels(self) -> int:
        return self.bins.shape[0]

    @property
    def alpha(self) -> np.ndarray:
        return bin_weights(self.T)

    def scatter(self, k: int) -> np.ndarray:
        """Chi[k] = x[k] x[k]^H for the 0-based retained bin k."""
        x = self.bins[:, k]
        return np.outer(x, x.conj())

    def real_scatter(self) -> np.ndarray:
        """Re{Chi[k]} for every retained bin, shape (n_bins, channels, channels)."""
        x = self.bins.T
        return np.einsum('ki,kj->kij', x, x.conj()).real


def bin_weights(T: int) -> np.ndarray:
    alpha = np.ones(T // 2 + 1)
    alpha[0] = 0.5
    alpha[-1] = 0.5
    return alpha
