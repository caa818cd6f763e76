import numpy as np
from pydantic import root_validator

from src.models.base import ArrayModel
from src.models.signal import FrequencyObservations, ModelParams


class SourceEstimate(ArrayModel):
    S_hat: np.ndarray
    freq_bins: FrequencyObservations
    params_used: ModelParams

    @root_validator(skip_on_failure=True)
    def consistent_shapes(cls, values):
        if values['S_hat'].shape != (values['freq_bins'].n_channels, values['freq_bins'].T):
            raise ValueError('time and frequency representations have different shapes')
        return values


class MsePrediction(ArrayModel):
    per_source: np.ndarray
    per_bin: np.ndarray

    @property
    def per_source_db(self) -> np.ndarray:
        with np.errstate(divide='ignore'):
            return 10.0 * np.log10(self.per_source)
