import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.core.exceptions import DegenerateProcessError, DimensionError, SignalValidationError, StabilityError
from src.core.presets import get_preset
from src.models.experiment import SourceSpec
from src.models.signal import FrequencyObservations, TimeSeriesBlock, bin_weights
from src.services.signal_model import (ar1_spectrum, center_telegraph, dft_forward, dft_inverse, flat_spectrum,
                                       generate_ar1, generate_source, generate_telegraph, mix_and_observe,
                                       noise_variance_for_snr, noise_variances_from_db, received_source_power,
                                       source_spectra, source_spectrum, telegraph_spectrum)
from tests.conftest import dft_matrix


def lag1_correlation(x: np.ndarray) -> float:
    x = x - x.mean()
    return float(np.dot(x[1:], x[:-1]) / np.dot(x, x))


def test_dft_constant_row():
    obs = dft_forward(TimeSeriesBlock(data=[[1.5, 1.5, 1.5, 1.5]]))
    np.testing.assert_allclose(obs.bins, [[3.0, 0.0, 0.0]], atol=1e-15)


def test_dft_impulse_is_flat():
    obs = dft_forward(TimeSeriesBlock(data=[[1.0, 0.0, 0.0, 0.0]]))
    np.testing.assert_allclose(obs.bins, [[0.5, 0.5, 0.5]], atol=1e-15)


def test_dft_matches_direct_summation(rng):
    x = rng.standard_normal((2, 16))
    obs = dft_forward(TimeSeriesBlock(data=x))
    expected = (dft_matrix(16) @ x.T).T[:, :9]
    np.testing.assert_allclose(obs.bins, expected, atol=1e-12)
    np.testing.assert_allclose(dft_inverse(obs).data, x, atol=1e-12)


def test_dft_preserves_energy(rng):
    x = rng.standard_normal((3, 32))
    obs = dft_forward(TimeSeriesBlock(data=x))
    energy = 2 * np.sum(bin_weights(32) * np.abs(obs.bins) ** 2, axis=1)
    np.testing.assert_allclose(energy, np.sum(x ** 2, axis=1), rtol=1e-12)


def test_dft_inverse_of_constant_and_zero():
    constant = FrequencyObservations(bins=[[4.0, 0.0, 0.0]], T=4)
    np.testing.assert_allclose(dft_inverse(constant).data, [[2.0, 2.0, 2.0, 2.0]])
    zero = FrequencyObservations(bins=np.zeros((3, 5)), T=8)
    assert not np.any(dft_inverse(zero).data)


def test_dft_inverse_rejects_complex_real_bins():
    with pytest.raises(SignalValidationError):
        dft_inverse(FrequencyObservations(bins=[[1.0 + 0.5j, 0.0, 0.0]], T=4))


def test_dft_rejects_odd_length():
    with pytest.raises(DimensionError):
        dft_forward(TimeSeriesBlock(data=np.ones((1, 5))))


def test_ar1_spectrum_values():
    np.testing.assert_allclose(ar1_spectrum(0.0, 8).values, np.ones(8))
    assert ar1_spectrum(0.5, 8).values[0] == pytest.approx(3.0)
    assert ar1_spectrum(0.84, 1000).values[500] == pytest.approx((1 - 0.84 ** 2) / (1 + 0.84) ** 2)


@pytest.mark.parametrize('a', [1.0, -1.0, 1.5])
def test_ar1_spectrum_unstable(a):
    with pytest.raises(StabilityError):
        ar1_spectrum(a, 8)


@settings(deadline=None, max_examples=25)
@given(st.floats(-0.9, 0.9))
def test_ar1_spectrum_matches_autocovariance_sum(a):
    T = 64
    lags = np.arange(1, 400)
    omega = 2 * np.pi * np.arange(T) / T
    oracle = 1 + 2 * (a ** lags[np.newaxis, :] * np.cos(np.outer(omega, lags))).sum(axis=1)
    np.testing.assert_allclose(ar1_spectrum(a, T).values, oracle, rtol=1e-8, atol=1e-10)


@pytest.mark.parametrize('a', [0.84, 0.21, -0.57])
def test_ar1_spectrum_averages_to_unit_variance(a):
    assert ar1_spectrum(a, 1000).variance == pytest.approx(1.0, abs=1e-2)


def test_telegraph_spectrum_is_ar1_with_reflected_switch_probability():
    np.testing.assert_allclose(telegraph_spectrum(0.5, 16).values, np.ones(16), atol=1e-15)
    np.testing.assert_allclose(telegraph_spectrum(0.25, 16).values, ar1_spectrum(0.5, 16).values)
    np.testing.assert_allclose(telegraph_spectrum(0.75, 16).values, ar1_spectrum(-0.5, 16).values)


@pytest.mark.parametrize('alpha', [0.0, 1.0])
def test_telegraph_spectrum_degenerate(alpha):
    with pytest.raises(DegenerateProcessError):
        telegraph_spectrum(alpha, 16)


def test_source_spectrum_dispatch():
    assert source_spectrum(SourceSpec(kind='flat', power=2.0), 8).variance == pytest.approx(2.0)
    explicit = SourceSpec(kind='explicit', values=[1.0, 2.0, 3.0, 2.0])
    np.testing.assert_allclose(source_spectrum(explicit, 4).values, [1.0, 2.0, 3.0, 2.0])
    with pytest.raises(DimensionError):
        source_spectrum(explicit, 8)


def test_generate_ar1_white_and_deterministic():
    white = generate_ar1(0.0, 100_000, np.random.default_rng(1)).data[0]
    assert white.var() == pytest.approx(1.0, abs=0.02)
    first = generate_ar1(0.84, 512, np.random.default_rng(7)).data
    second = generate_ar1(0.84, 512, np.random.default_rng(7)).data
    assert np.array_equal(first, second)


def test_generate_ar1_lag1_correlation():
    path = generate_ar1(0.84, 100_000, np.random.default_rng(2)).data[0]
    assert lag1_correlation(path) == pytest.approx(0.84, abs=0.01)
    assert path.var() == pytest.approx(1.0, abs=0.05)


def test_generate_telegraph_states_and_correlation():
    path = generate_telegraph(0.25, 100_000, np.random.default_rng(3))
    assert set(np.unique(path.data)) <= {0.0, 2.0}
    centered = center_telegraph(path).data[0]
    assert set(np.unique(centered)) <= {-1.0, 1.0}
    assert lag1_correlation(centered) == pytest.approx(0.5, abs=0.02)


def test_generate_telegraph_fast_switching():
    path = generate_telegraph(0.99, 10_000, np.random.default_rng(4)).data[0]
    assert np.mean(np.diff(path) != 0) > 0.97


def test_generate_source_needs_a_generator():
    with pytest.raises(DimensionError):
        generate_source(SourceSpec(kind='flat', power=1.0), 16, np.random.default_rng(0))


def test_mix_and_observe_noiseless_identity(rng):
    S = TimeSeriesBlock(data=rng.standard_normal((2, 32)))
    X = mix_and_observe(np.eye(2), S, np.zeros(2), rng)
    assert np.array_equal(X.data, S.data)


def test_mix_and_observe_noise_only(rng):
    S = TimeSeriesBlock(data=np.zeros((1, 50_000)))
    X = mix_and_observe(np.ones((3, 1)), S, np.array([0.5, 1.0, 2.0]), rng)
    np.testing.assert_allclose(X.data.var(axis=1), [0.5, 1.0, 2.0], rtol=0.03)


def test_mix_and_observe_checks_shapes(rng):
    S = TimeSeriesBlock(data=np.zeros((2, 8)))
    with pytest.raises(DimensionError):
        mix_and_observe(np.ones((3, 3)), S, np.ones(3), rng)
    with pytest.raises(DimensionError):
        mix_and_observe(np.ones((3, 2)), S, np.ones(2), rng)


def test_first_experiment_is_roughly_30db_snr():
    cfg = get_preset('exp1a')
    spectra = source_spectra(cfg.sources, cfg.dims.T)
    snr_db = 10 * np.log10(received_source_power(cfg.A, spectra) / 0.001)
    assert snr_db == pytest.approx(30.0, abs=0.5)


def test_noise_levels():
    np.testing.assert_allclose(noise_variances_from_db([-20.0, 0.0, 10.0]), [0.01, 1.0, 10.0])
    spectra = [flat_spectrum(1.0, 8), flat_spectrum(1.0, 8)]
    A = np.array([[1.0, 1.0], [1.0, -1.0]])
    assert noise_variance_for_snr(A, spectra, 10.0) == pytest.approx(0.2)
