import numpy as np
import orjson
import pytest
from pydantic import ValidationError

from src.core.presets import PRESETS, get_preset
from src.models.experiment import ExperimentConfig, NoiseSpec, ReportTable, SourceSpec
from src.models.manifest import config_digest
from src.models.signal import Dimensions, ModelParams, SpectralProfile, TimeSeriesBlock


def test_dimensions():
    dims = Dimensions(M=2, L=5, T=250)
    assert dims.n_bins == 126
    assert dims.n_params == 15
    with pytest.raises(ValidationError, match='T must be even'):
        Dimensions(M=2, L=5, T=251)
    with pytest.raises(ValidationError, match='L must be'):
        Dimensions(M=3, L=2, T=8)


def test_spectral_profile_must_be_symmetric_and_nonnegative():
    assert SpectralProfile(values=[2.0, 1.0, 0.5, 1.0]).retained().tolist() == [2.0, 1.0, 0.5]
    with pytest.raises(ValidationError):
        SpectralProfile(values=[1.0, 2.0, 3.0, 4.0])
    with pytest.raises(ValidationError):
        SpectralProfile(values=[1.0, -1.0, 1.0, -1.0])


def test_model_params_vector_is_column_major():
    params = ModelParams.parse_obj({'A': [[1.0, 3.0], [2.0, 4.0]], 'lambda': [5.0, 6.0]})
    np.testing.assert_array_equal(params.to_vector(), [1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    again = ModelParams.from_vector(params.to_vector(), 2, 2)
    np.testing.assert_array_equal(again.A, params.A)
    assert again.A.flags['C_CONTIGUOUS']
    document = orjson.loads(orjson.dumps(again.dict(by_alias=True), option=orjson.OPT_SERIALIZE_NUMPY))
    assert document['A'] == [[1.0, 3.0], [2.0, 4.0]]
    assert list(params.dict(by_alias=True)) == ['A', 'lambda']


def test_model_params_rejects_inconsistent_input():
    with pytest.raises(ValidationError):
        ModelParams(A=[[1.0], [2.0]], lam=[1.0])
    with pytest.raises(ValidationError):
        ModelParams(A=[[1.0]], lam=[-1.0])
    with pytest.raises(ValueError, match='theta must have 6 entries'):
        ModelParams.from_vector(np.ones(5), 2, 2)


def test_time_series_must_be_finite():
    assert TimeSeriesBlock(data=[1.0, 2.0]).n_channels == 1
    with pytest.raises(ValidationError):
        TimeSeriesBlock(data=[[1.0, np.nan]])


def test_source_spec_needs_its_parameter():
    with pytest.raises(ValidationError, match="requires 'a'"):
        SourceSpec(kind='ar1')
    with pytest.raises(ValidationError):
        SourceSpec(kind='gaussian', a=0.5)


def test_noise_spec_takes_exactly_one_form():
    with pytest.raises(ValidationError, match='exactly one'):
        NoiseSpec(variance=1.0, snr_db=[0.0])
    with pytest.raises(ValidationError):
        NoiseSpec()


def test_experiment_config_checks_dimensions():
    document = PRESETS['exp2'] | {'mixing': [[1.0, 0.0]] * 4}
    with pytest.raises(ValidationError, match='mixing must be 5x2'):
        ExperimentConfig.parse_obj(document)
    with pytest.raises(ValidationError, match='T must be even'):
        ExperimentConfig.parse_obj(PRESETS['exp1b'] | {'T_grid': [250, 333]})


@pytest.mark.parametrize('name', sorted(PRESETS))
def test_presets_parse(name):
    cfg = get_preset(name)
    assert cfg.name == name
    assert cfg.seed == 2018
    assert cfg.A.shape == (cfg.dims.L, cfg.dims.M)
    assert cfg.scoring.common_noise == (name == 'exp3')


def test_noise_variances_from_each_form():
    np.testing.assert_allclose(get_preset('exp1b').noise_variances(), [1e-2, 10 ** -2.5, 1e-3, 10 ** -3.5])
    np.testing.assert_allclose(get_preset('exp2').noise_variances(), np.ones(5))
    with pytest.raises(ValueError, match='SNR grid'):
        get_preset('exp3').noise_variances()


def test_with_T_keeps_everything_else():
    cfg = get_preset('exp2').with_T(500)
    assert cfg.dims.T == 500
    assert cfg.mixing == get_preset('exp2').mixing


def test_config_digest_ignores_key_order():
    assert config_digest({'a': 1, 'b': [1.5, 2]}) == config_digest({'b': [1.5, 2], 'a': 1})
    assert config_digest({'a': 1}) != config_digest({'a': 2})


def test_report_table_converts_numpy_scalars():
    table = ReportTable(columns=['T', 'value'])
    table.add(np.int64(4), np.float64(0.5))
    assert table.rows == [[4, 0.5]]
    assert type(table.rows[0][0]) is int
    with pytest.raises(ValueError, match='row has 1 fields'):
        table.add(1)
