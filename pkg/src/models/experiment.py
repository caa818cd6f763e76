from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, Field, root_validator, validator

from src.models.base import ArrayModel
from src.models.scoring import ScoringConfig
from src.models.signal import Dimensions, ModelParams


class SourceSpec(BaseModel):
    kind: Literal['ar1', 'telegraph', 'flat', 'explicit']
    a: Optional[float] = None
    switch_probability: Optional[float] = None
    power: Optional[float] = Field(None, ge=0)
    values: Optional[List[float]] = None

    @root_validator(skip_on_failure=True)
    def required_field(cls, values):
        required = {'ar1': 'a', 'telegraph': 'switch_probability', 'flat': 'power', 'explicit': 'values'}
        field = required[values['kind']]
        if values.get(field) is None:
            raise ValueError(f'source kind {values["kind"]!r} requires {field!r}')
        return values


class NoiseSpec(BaseModel):
    variances: Optional[List[float]] = None
    variance: Optional[float] = Field(None, ge=0)
    variances_db: Optional[List[float]] = None
    snr_db: Optional[List[float]] = None

    @root_validator(skip_on_failure=True)
    def exactly_one(cls, values):
        given = [name for name in ('variances', 'variance', 'variances_db', 'snr_db') if values.get(name) is not None]
        if len(given) != 1:
            raise ValueError(f'exactly one of variances, variance, variances_db, snr_db is required, got {given}')
        if values.get('variances') is not None and any(v < 0 for v in values['variances']):
            raise ValueError('noise variances must be nonnegative')
        return values


class ExperimentConfig(BaseModel):
    name: str = 'custom'
    dims: Dimensions
    mixing: List[List[float]]
    noise: NoiseSpec
    sources: List[SourceSpec]
    trials: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)
    T_grid: Optional[List[int]] = None
    scoring: ScoringConfig = ScoringConfig()

    @validator('T_grid')
    def even_grid(cls, value: Optional[List[int]]) -> Optional[List[int]]:
        if value is not None:
            if not value:
                raise ValueError('T_grid must not be empty')
            for T in value:
                Dimensions(M=1, L=1, T=T)
        return value

    @root_validator(skip_on_failure=True)
    def consistent_dimensions(cls, values):
        dims = values['dims']
        mixing = values['mixing']
        if len(mixing) != dims.L or any(len(row) != dims.M for row in mixing):
            found = f'{len(mixing)}x{len(mixing[0]) if mixing else 0}'
            raise ValueError(f'mixing must be {dims.L}x{dims.M} (L x M), found {found}')
        if len(values['sources']) != dims.M:
            raise ValueError(f'expected {dims.M} sources (M), found {len(values["sources"])}')
        noise = values['noise']
        for name in ('variances', 'variances_db'):
            levels = getattr(noise, name)
            if levels is not None and len(levels) != dims.L:
                raise ValueError(f'noise {name} must have {dims.L} entries (L), found {len(levels)}')
        return values

    @property
    def A(self) -> np.ndarray:
        return np.array(self.mixing, dtype=float)

    def noise_variances(self) -> np.ndarray:
        if self.noise.variances is not None:
            return np.array(self.noise.variances, dtype=float)
        if self.noise.variances_db is not None:
            return 10.0 ** (np.array(self.noise.variances_db, dtype=float) / 10.0)
        if self.noise.variance is not None:
            return np.full(self.dims.L, self.noise.variance)
        raise ValueError('noise is given as an SNR grid; variances depend on the grid point')

    def true_params(self) -> ModelParams:
        return ModelParams(A=self.A, lam=self.noise_variances())

    def with_T(self, T: int) -> 'ExperimentConfig':
        return self.copy(update={'dims': Dimensions(M=self.dims.M, L=self.dims.L, T=T)}, deep=True)


class TrialOutcome(ArrayModel):
    index: int
    converged: bool
    iterations: int = 0
    theta_hat: Optional[ModelParams] = None
    theta_sq_err: Optional[np.ndarray] = None
    source_sq_err: Optional[np.ndarray] = None
    oracle_sq_err: Optional[np.ndarray] = None
    bit_errors: Optional[np.ndarray] = None
    oracle_bit_errors: Optional[np.ndarray] = None
    score: Optional[np.ndarray] = None
    n_bits: int = 0


class AggregateStat(ArrayModel):
    mean: np.ndarray
    stderr: np.ndarray
    count: int


class AggregateReport(ArrayModel):
    n_trials: int
    n_excluded: int
    stats: Dict[str, AggregateStat] = {}

    @property
    def exclusion_rate(self) -> float:
        return self.n_excluded / self.n_trials


class ReportTable(BaseModel):
    columns: List[str]
    rows: List[List[Union[float, int, str]]] = []

    def add(self, *row: Union[float, int, str]) -> None:
        if len(row) != len(self.columns):
            raise ValueError(f'row has {len(row)} fields, table has {len(self.columns)} columns')
        self.rows.append([value.item() if isinstance(value, np.generic) else value for value in row])


class ExperimentReport(BaseModel):
    name: str
    tables: Dict[str, ReportTable] = {}
    summary: Dict[str, Any] = {}
