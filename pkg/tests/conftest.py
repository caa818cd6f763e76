from typing import List

import numpy as np
import pytest

from src.models.signal import ModelParams, SpectralProfile
from src.services.signal_model import ar1_spectrum

SMALL_AR = (0.84, -0.57)


def dft_matrix(T: int) -> np.ndarray:
    grid = np.arange(T)
    return np.exp(-2j * np.pi * np.outer(grid, grid) / T) / np.sqrt(T)


def circulant_covariance(spectrum: SpectralProfile) -> np.ndarray:
    """Time-domain covariance whose DFT diagonal is the given spectrum."""
    F = dft_matrix(spectrum.T)
    return (F.conj().T @ np.diag(spectrum.values) @ F).real


def dense_mixture_covariance(params: ModelParams, spectra: List[SpectralProfile]) -> np.ndarray:
    """Covariance of X.ravel() (sensor-major) built from Kronecker blocks."""
    T = spectra[0].T
    sigma = np.kron(np.diag(params.lam), np.eye(T))
    for m, spectrum in enumerate(spectra):
        sigma += np.kron(np.outer(params.A[:, m], params.A[:, m]), circulant_covariance(spectrum))
    return sigma


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20180601)


@pytest.fixture
def small_params(rng) -> ModelParams:
    return ModelParams(A=rng.standard_normal((3, 2)), lam=rng.uniform(0.2, 0.8, size=3))


@pytest.fixture
def small_spectra():
    def build(T: int) -> List[SpectralProfile]:
        return [ar1_spectrum(a, T) for a in SMALL_AR]
    return build
