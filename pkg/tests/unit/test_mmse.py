import numpy as np
import pytest

from src.core.exceptions import RankDeficiencyError
from src.core.presets import get_preset
from src.models.signal import FrequencyObservations, ModelParams, TimeSeriesBlock
from src.services.mmse import (bit_decisions, estimate_sources, interference_to_source_ratio, lmmse_filter_bins,
                               maximally_separating_demix, mse_prediction)
from src.services.signal_model import ar1_spectrum, dft_forward, generate_sources, mix_and_observe, source_spectra
from tests.conftest import circulant_covariance, dense_mixture_covariance

SQUARE_MIXING = np.array([[1.0, 0.4], [-0.3, 0.8]])


def test_scalar_wiener_gain():
    spectrum = ar1_spectrum(0.5, 16)
    params = ModelParams(A=[[1.0]], lam=[0.7])
    filters = lmmse_filter_bins(params, [spectrum])
    power = spectrum.retained()
    np.testing.assert_allclose(filters[:, 0, 0], power / (power + 0.7))
    prediction = mse_prediction(params, params, [spectrum])
    np.testing.assert_allclose(prediction.per_bin[0], power * 0.7 / (power + 0.7))


def test_vanishing_noise_inverts_the_mixing():
    spectra = [ar1_spectrum(0.84, 16), ar1_spectrum(-0.57, 16)]
    filters = lmmse_filter_bins(ModelParams(A=SQUARE_MIXING, lam=[1e-10, 1e-10]), spectra)
    for W in filters:
        np.testing.assert_allclose(W, np.linalg.inv(SQUARE_MIXING), atol=1e-6)


def test_noiseless_square_mixing_recovers_sources(rng):
    spectra = [ar1_spectrum(0.84, 64), ar1_spectrum(-0.57, 64)]
    S = TimeSeriesBlock(data=rng.standard_normal((2, 64)))
    params = ModelParams(A=SQUARE_MIXING, lam=[0.0, 0.0])
    X = mix_and_observe(params.A, S, params.lam, rng)
    estimate = estimate_sources(params, dft_forward(X), spectra)
    np.testing.assert_allclose(estimate.S_hat, S.data, atol=1e-8)
    np.testing.assert_allclose(mse_prediction(params, params, spectra).per_source, 0.0, atol=1e-12)


def test_zero_observations_give_zero_estimate(small_params, small_spectra):
    obs = FrequencyObservations(bins=np.zeros((3, 9)), T=16)
    assert not np.any(estimate_sources(small_params, obs, small_spectra(16)).S_hat)


@pytest.mark.parametrize('T', [8, 16, 32])
def test_frequency_domain_estimate_matches_dense_lmmse(small_params, small_spectra, rng, T):
    spectra = small_spectra(T)
    S = TimeSeriesBlock(data=rng.standard_normal((2, T)))
    X = mix_and_observe(small_params.A, S, small_params.lam, rng)
    sigma_x = dense_mixture_covariance(small_params, spectra)
    sigma_sx = np.hstack([
        np.vstack([small_params.A[sensor, m] * circulant_covariance(spectra[m]) for m in range(2)])
        for sensor in range(3)
    ])
    dense = (sigma_sx @ np.linalg.solve(sigma_x, X.data.ravel())).reshape(2, T)
    fast = estimate_sources(small_params, dft_forward(X), spectra).S_hat
    np.testing.assert_allclose(fast, dense, atol=1e-8)


def test_estimation_error_is_orthogonal_to_the_estimate(small_params, small_spectra):
    T = 16
    spectra = small_spectra(T)
    # estimate_sources is linear in X, so its dense matrix follows from unit impulses
    columns = []
    for j in range(3 * T):
        impulse = np.zeros(3 * T)
        impulse[j] = 1.0
        X = TimeSeriesBlock(data=impulse.reshape(3, T))
        columns.append(estimate_sources(small_params, dft_forward(X), spectra).S_hat.ravel())
    W = np.column_stack(columns)
    sigma_x = dense_mixture_covariance(small_params, spectra)
    sigma_sx = np.hstack([
        np.vstack([small_params.A[sensor, m] * circulant_covariance(spectra[m]) for m in range(2)])
        for sensor in range(3)
    ])
    cross = W @ sigma_x @ W.T - sigma_sx @ W.T
    np.testing.assert_allclose(cross, 0.0, atol=1e-10)


def test_mse_prediction_matches_dense_error_covariance(small_params, small_spectra):
    T = 16
    spectra = small_spectra(T)
    sigma_x = dense_mixture_covariance(small_params, spectra)
    sigma_sx = np.hstack([
        np.vstack([small_params.A[sensor, m] * circulant_covariance(spectra[m]) for m in range(2)])
        for sensor in range(3)
    ])
    sigma_s = np.kron(np.eye(2), np.eye(T))
    for m in range(2):
        sigma_s[m * T:(m + 1) * T, m * T:(m + 1) * T] = circulant_covariance(spectra[m])
    error = sigma_s - sigma_sx @ np.linalg.solve(sigma_x, sigma_sx.T)
    dense = np.array([np.trace(error[m * T:(m + 1) * T, m * T:(m + 1) * T]) / T for m in range(2)])
    np.testing.assert_allclose(mse_prediction(small_params, small_params, spectra).per_source, dense, rtol=1e-9)


def test_mismatched_parameters_never_beat_the_bound(small_params, small_spectra, rng):
    spectra = small_spectra(32)
    oracle = mse_prediction(small_params, small_params, spectra).per_source
    for _ in range(5):
        theta = small_params.to_vector() + 0.1 * rng.standard_normal(small_params.n_params)
        theta[6:] = np.abs(theta[6:])
        assumed = ModelParams.from_vector(theta, 3, 2)
        assert np.all(mse_prediction(assumed, small_params, spectra).per_source >= oracle - 1e-12)


def test_bound_stays_below_source_variance(small_params, small_spectra):
    spectra = small_spectra(64)
    prediction = mse_prediction(small_params, small_params, spectra)
    assert np.all(prediction.per_bin >= 0)
    assert np.all(prediction.per_source <= [spectrum.variance for spectrum in spectra])


@pytest.mark.parametrize(('name', 'expected'), [
    ('exp1a', [-24.34, -25.53, -26.98]),
    ('exp2', [-6.53, -9.36]),
])
def test_mmse_bounds_of_reference_setups(name, expected):
    cfg = get_preset(name)
    truth = cfg.true_params()
    prediction = mse_prediction(truth, truth, source_spectra(cfg.sources, cfg.dims.T))
    np.testing.assert_allclose(prediction.per_source_db, expected, atol=0.1)


def test_empirical_mse_matches_prediction():
    cfg = get_preset('exp2')
    truth = cfg.true_params()
    T = 256
    spectra = source_spectra(cfg.sources, T)
    rng = np.random.default_rng(99)
    errors = []
    for _ in range(400):
        S = generate_sources(cfg.sources, T, rng)
        X = mix_and_observe(truth.A, S, truth.lam, rng)
        errors.append(np.mean((estimate_sources(truth, dft_forward(X), spectra).S_hat - S.data) ** 2, axis=1))
    predicted = mse_prediction(truth, truth, spectra).per_source
    np.testing.assert_allclose(np.mean(errors, axis=0), predicted, rtol=0.05)


def test_maximally_separating_demix(rng):
    A = np.array([[1.0, 0.2], [0.3, -1.0], [0.5, 0.5]])
    S = TimeSeriesBlock(data=rng.standard_normal((2, 32)))
    X = mix_and_observe(A, S, np.zeros(3), rng)
    np.testing.assert_allclose(maximally_separating_demix(A, X).data, S.data, atol=1e-12)
    np.testing.assert_allclose(interference_to_source_ratio(np.linalg.pinv(A), A), 0.0, atol=1e-20)


def test_orthonormal_demix_is_transpose(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    X = TimeSeriesBlock(data=rng.standard_normal((3, 16)))
    np.testing.assert_allclose(maximally_separating_demix(Q, X).data, Q.T @ X.data, atol=1e-12)


def test_rank_deficient_demix_names_columns(rng):
    A = np.array([[1.0, 2.0, 0.0], [1.0, 2.0, 1.0], [0.0, 0.0, 1.0], [1.0, 2.0, 0.0]])
    with pytest.raises(RankDeficiencyError, match='columns 1, 2'):
        maximally_separating_demix(A, TimeSeriesBlock(data=rng.standard_normal((4, 8))))


def test_interference_ratio_of_leaky_demixer():
    ratio = interference_to_source_ratio(np.array([[1.0, 0.1], [0.2, 1.0]]), np.eye(2))
    np.testing.assert_allclose(ratio, [0.01, 0.04])


def test_bit_decisions():
    np.testing.assert_array_equal(bit_decisions([[0.3, -0.1, 0.0]]), [[1.0, -1.0, -1.0]])
