from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, validator

from src.models.base import ArrayModel

StopReason = Literal['gradient', 'step', 'max_iters', 'non_pd', 'line_search']


class ScoringConfig(BaseModel):
    max_iters: int = Field(200, gt=0)
    # tolerance on the score max-norm per retained frequency bin (the score grows like T/2)
    grad_tol: float = Field(1e-8, gt=0, lt=1)
    step_tol: float = Field(1e-10, gt=0, lt=1)
    damping: float = Field(1.0, gt=0, le=1)
    max_halvings: int = Field(30, gt=0)
    # absolute floor on the noise variances; derived from the mixture power when left empty
    lambda_floor: Optional[float] = Field(None, gt=0)
    lambda_floor_ratio: float = Field(1e-10, gt=0, lt=1)
    # estimate one noise variance shared by all sensors instead of one per sensor
    common_noise: bool = False

    def floor_for(self, average_power: float) -> float:
        if self.lambda_floor is not None:
            return self.lambda_floor
        return max(self.lambda_floor_ratio * average_power, np.finfo(float).tiny)


class ScoringIterate(ArrayModel):
    theta: np.ndarray
    log_likelihood: float
    score_norm: float
    step_size: float

    @validator('theta', pre=True)
    def theta_vector(cls, value) -> np.ndarray:
        return np.array(value, dtype=float)


class ScoringTrace(ArrayModel):
    iterates: List[ScoringIterate] = []
    converged: bool = False
    reason: StopReason = 'max_iters'
    ridge_used: bool = False

    @property
    def iterations(self) -> int:
        return max(len(self.iterates) - 1, 0)


class FisherInfo(ArrayModel):
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


class CrlbMatrix(ArrayModel):
    matrix: np.ndarray
    condition_number: float
    pseudo_inverse: bool = False
    labels: List[str] = []

    def diagonal(self) -> np.ndarray:
        return np.diag(self.matrix).copy()
