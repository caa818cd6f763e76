"""Fisher information, CRLB and the Fisher-scoring solver of the likelihood equations."""
import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg

from src.core.exceptions import DimensionError, NotPositiveDefiniteError, NumericalError
from src.models.scoring import CrlbMatrix, FisherInfo, ScoringConfig, ScoringIterate, ScoringTrace
from src.models.signal import (Dimensions, FrequencyObservations, ModelParams, SpectralProfile, TimeSeriesBlock,
                               bin_weights, stack_spectra)
from src.services.likelihood import covariances_from_power, scatter_log_likelihood, scatter_score

logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12
SIGN_TOLERANCE = 1e-9
RIDGE_FACTOR = 1e-12
FLOOR_TOLERANCE = 1e-9
LIKELIHOOD_ROUNDING = 1e-13


def parameter_labels(L: int, M: int) -> List[str]:
    labels = [f'A[{i + 1},{j + 1}]' for j in range(M) for i in range(L)]
    return labels + [f'lambda[{i + 1}]' for i in range(L)]


def _covariance_derivatives(params: ModelParams, power: np.ndarray) -> np.ndarray:
    """dC_k/dtheta_p for every bin and parameter, shape (n_bins, K_theta, L, L)."""
    L, M = params.L, params.M
    n_bins = power.shape[0]
    derivatives = np.zeros((n_bins, params.n_params, L, L))
    for j in range(M):
        for i in range(L):
            base = np.zeros((L, L))
            base[i, :] += params.A[:, j]
            base[:, i] += params.A[:, j]
            derivatives[:, j * L + i] = power[:, j, np.newaxis, np.newaxis] * base
    for sensor in range(L):
        derivatives[:, L * M + sensor, sensor, sensor] = 1.0
    return derivatives


def fim_from_power(params: ModelParams, power: np.ndarray) -> FisherInfo:
    cov = covariances_from_power(params, power)
    alpha = bin_weights(2 * (power.shape[0] - 1))
    B = cov.Cinv[:, np.newaxis] @ _covariance_derivatives(params, power)
    n_bins, n_params, L, _ = B.shape
    left = (alpha[:, np.newaxis, np.newaxis] * B.reshape(n_bins, n_params, L * L)).transpose(1, 0, 2)
    right = B.transpose(0, 1, 3, 2).reshape(n_bins, n_params, L * L).transpose(1, 0, 2)
    matrix = left.reshape(n_params, -1) @ right.reshape(n_params, -1).T
    return FisherInfo(matrix=0.5 * (matrix + matrix.T))


def fim(params: ModelParams, spectra: List[SpectralProfile]) -> FisherInfo:
    power = stack_spectra(spectra)
    if power.shape[1] != params.M:
        raise DimensionError(f'{power.shape[1]} spectra given for M={params.M} sources')
    return fim_from_power(params, power)


def _jacobi_scaling(matrix: np.ndarray) -> np.ndarray:
    diagonal = np.diag(matrix).copy()
    diagonal[diagonal <= 0] = 1.0
    return 1.0 / np.sqrt(diagonal)


def crlb(params: ModelParams, spectra: List[SpectralProfile]) -> CrlbMatrix:
    """Inverse FIM; falls back to the pseudo-inverse when the scaled FIM is ill-conditioned."""
    information = fim(params, spectra).matrix
    scaling = _jacobi_scaling(information)
    scaled = scaling[:, np.newaxis] * information * scaling[np.newaxis, :]
    condition_number = float(np.linalg.cond(scaled))
    labels = parameter_labels(params.L, params.M)
    if not np.isfinite(condition_number) or condition_number > CONDITION_LIMIT:
        logger.warning(
            'FIM condition number %.3e exceeds %.0e: parameters may be unidentifiable, using the pseudo-inverse',
            condition_number, CONDITION_LIMIT,
        )
        return CrlbMatrix(
            matrix=linalg.pinvh(information),
            condition_number=condition_number,
            pseudo_inverse=True,
            labels=labels,
        )
    factor = linalg.cho_factor(scaled)
    inverse = linalg.cho_solve(factor, np.eye(scaled.shape[0]))
    matrix = scaling[:, np.newaxis] * inverse * scaling[np.newaxis, :]
    return CrlbMatrix(matrix=0.5 * (matrix + matrix.T), condition_number=condition_number, labels=labels)


def average_power(X: TimeSeriesBlock) -> float:
    return float(np.mean(X.data ** 2))


def initialize(
        X: TimeSeriesBlock,
        dims: Dimensions,
        cfg: Optional[ScoringConfig] = None,
        spectra: Optional[List[SpectralProfile]] = None,
) -> ModelParams:
    """A0 = [I_M; 0] and every noise variance equal to the smallest eigenvalue of X X^T / T.

    With the source spectra at hand A0 is scaled so that A0 diag(P) A0^T carries the signal power
    left in X once the noise is taken out, which keeps the start on the scale of the data.
    """
    cfg = cfg or ScoringConfig()
    if X.data.shape != (dims.L, dims.T):
        raise DimensionError(f'expected an {dims.L}x{dims.T} mixture, found {X.data.shape[0]}x{X.data.shape[1]}')
    sample_covariance = X.data @ X.data.T / dims.T
    smallest = max(float(np.linalg.eigvalsh(sample_covariance)[0]), cfg.floor_for(average_power(X)))
    gain = 1.0
    if spectra is not None:
        signal_power = float(np.trace(sample_covariance)) - dims.L * smallest
        source_power = sum(spectrum.variance for spectrum in spectra)
        if signal_power > 0 and source_power > 0:
            gain = np.sqrt(signal_power / source_power)
    return ModelParams(A=gain * np.eye(dims.L, dims.M), lam=np.full(dims.L, smallest))


def _solve_fisher_system(information: np.ndarray, gradient: np.ndarray) -> Tuple[Optional[np.ndarray], bool]:
    diagonal = np.diag(information)
    if not np.all(diagonal > 0):
        logger.warning('FIM has a nonpositive diagonal entry (min %.3e)', float(diagonal.min()))
        return None, False
    scaling = 1.0 / np.sqrt(diagonal)
    scaled = scaling[:, np.newaxis] * information * scaling[np.newaxis, :]
    rhs = scaling * gradient
    try:
        factor = linalg.cho_factor(scaled)
        return scaling * linalg.cho_solve(factor, rhs), False
    except linalg.LinAlgError:
        pass
    ridge = RIDGE_FACTOR * np.trace(scaled) / scaled.shape[0]
    logger.warning('FIM factorization failed, adding ridge %.3e', ridge)
    try:
        factor = linalg.cho_factor(scaled + ridge * np.eye(scaled.shape[0]))
    except linalg.LinAlgError:
        return None, True
    return scaling * linalg.cho_solve(factor, rhs), True


class FisherScoring:
    """theta_n = theta_{n-1} + I^-1(theta_{n-1}) grad L(theta_{n-1}), safeguarded by backtracking.

    On non-Gaussian data the same iteration is a quasi-Newton solver of the quasi-likelihood equations.

    The iteration works on the mixtures divided by their average power, so grad_tol and step_tol
    apply to scale-free parameters and the reported score norms are those of the normalized problem.
    A noise variance resting on lambda_floor whose score points below the floor is held for the
    step and left out of the score norm (projected scoring). With common_noise the unknowns are
    vec(A) and one variance shared by all sensors.
    """

    def __init__(self, obs: FrequencyObservations, spectra: List[SpectralProfile], cfg: ScoringConfig):
        self.power = stack_spectra(spectra)
        if obs.n_bins != self.power.shape[0]:
            raise DimensionError(f'observations have T={obs.T} but spectra have T={spectra[0].T}')
        scatter = obs.real_scatter()
        alpha = bin_weights(obs.T)
        self.data_power = float(np.einsum('k,kll->', alpha, scatter) / (obs.n_channels * alpha.sum()))
        if not self.data_power > 0:
            raise NumericalError('mixtures carry no power')
        self.scatter = scatter / self.data_power
        self.cfg = cfg
        self.T = obs.T
        self.L, self.M = obs.n_channels, self.power.shape[1]
        self.n_mixing = self.L * self.M
        self.floor = cfg.floor_for(self.data_power)
        self.lambda_floor = self.floor / self.data_power
        self.grad_tol = cfg.grad_tol * obs.T / 2
        # log-likelihood of the raw data minus that of the normalized data
        self.log_likelihood_offset = -self.L * np.log(self.data_power) * alpha.sum()
        self.expansion = self._expansion()

    def _expansion(self) -> np.ndarray:
        """Maps the unknowns to the full [vec(A); lambda] vector."""
        n_noise = 1 if self.cfg.common_noise else self.L
        expansion = np.zeros((self.n_mixing + self.L, self.n_mixing + n_noise))
        expansion[:self.n_mixing, :self.n_mixing] = np.eye(self.n_mixing)
        expansion[self.n_mixing:, self.n_mixing:] = 1.0 if self.cfg.common_noise else np.eye(self.L)
        return expansion

    def run(self, init: ModelParams) -> Tuple[ModelParams, ScoringTrace]:
        if init.M != self.M or init.L != self.L:
            raise DimensionError(f'initial parameters are {init.L}x{init.M}, data need {self.L}x{self.M}')
        theta = self._start(init)
        trace = ScoringTrace()

        current = self._evaluate(theta)
        if current is None:
            raise NotPositiveDefiniteError('initial parameters give a covariance that is not positive definite')
        log_likelihood, gradient = current
        step_size = 0.0
        for iteration in range(self.cfg.max_iters + 1):
            held = self._held_at_floor(theta, gradient)
            score_norm = self._projected_norm(gradient, held)
            self._record(trace, theta, log_likelihood, score_norm, step_size)
            logger.debug('iteration %d: log-likelihood %.10e, score %.3e, %d variances at the floor',
                         iteration, trace.iterates[-1].log_likelihood, score_norm, int(held.sum()))
            if score_norm <= self.grad_tol:
                trace.converged, trace.reason = True, 'gradient'
                break
            if iteration == self.cfg.max_iters:
                trace.reason = 'max_iters'
                break

            direction, ridge_used = self._direction(theta, gradient, held)
            trace.ridge_used = trace.ridge_used or ridge_used
            if direction is None:
                trace.reason = 'non_pd'
                break

            accepted = self._line_search(theta, direction, log_likelihood)
            if accepted is None:
                trace.reason = 'line_search'
                break
            new_theta, (log_likelihood, gradient), step_size = accepted
            change = np.max(np.abs(new_theta - theta)) / np.max(np.abs(theta))
            theta = new_theta
            if change <= self.cfg.step_tol:
                score_norm = self._projected_norm(gradient, self._held_at_floor(theta, gradient))
                self._record(trace, theta, log_likelihood, score_norm, step_size)
                # a stalled step only counts as convergence when the score agrees
                trace.converged = score_norm <= self.grad_tol
                trace.reason = 'gradient' if trace.converged else 'step'
                break
        return self._params(theta), trace

    def _start(self, init: ModelParams) -> np.ndarray:
        A = init.A.ravel(order='F') / np.sqrt(self.data_power)
        lam = init.lam / self.data_power
        if self.cfg.common_noise:
            lam = np.array([lam.mean()])
        return np.concatenate([A, np.maximum(lam, self.lambda_floor)])

    def _normalized(self, theta: np.ndarray) -> ModelParams:
        return ModelParams.from_vector(self.expansion @ theta, self.L, self.M)

    def _params(self, theta: np.ndarray) -> ModelParams:
        full = self.expansion @ theta
        A = full[:self.n_mixing] * np.sqrt(self.data_power)
        lam = np.maximum(full[self.n_mixing:] * self.data_power, self.floor)
        return ModelParams.from_vector(np.concatenate([A, lam]), self.L, self.M)

    def _record(self, trace: ScoringTrace, theta: np.ndarray, log_likelihood: float, score_norm: float,
                step_size: float) -> None:
        trace.iterates.append(ScoringIterate(
            theta=self._params(theta).to_vector(),
            log_likelihood=log_likelihood + self.log_likelihood_offset,
            score_norm=score_norm,
            step_size=step_size,
        ))

    def _at_floor(self, theta: np.ndarray) -> np.ndarray:
        at_floor = np.zeros(theta.size, dtype=bool)
        at_floor[self.n_mixing:] = theta[self.n_mixing:] <= self.lambda_floor * (1.0 + FLOOR_TOLERANCE)
        return at_floor

    def _held_at_floor(self, theta: np.ndarray, gradient: np.ndarray) -> np.ndarray:
        return self._at_floor(theta) & (gradient < 0)

    @staticmethod
    def _projected_norm(gradient: np.ndarray, held: np.ndarray) -> float:
        return float(np.max(np.abs(np.where(held, 0.0, gradient))))

    def _evaluate(self, theta: np.ndarray) -> Optional[Tuple[float, np.ndarray]]:
        params = self._normalized(theta)
        try:
            log_likelihood = scatter_log_likelihood(params, self.scatter, self.power)
            gradient = scatter_score(params, self.scatter, self.power).values
        except (NotPositiveDefiniteError, NumericalError):
            return None
        return log_likelihood, self.expansion.T @ gradient

    def _direction(self, theta: np.ndarray, gradient: np.ndarray,
                   held: np.ndarray) -> Tuple[Optional[np.ndarray], bool]:
        """Fisher step over the free unknowns; variances at the floor that the step would push down are held too."""
        information = self.expansion.T @ fim_from_power(self._normalized(theta), self.power).matrix @ self.expansion
        at_floor = self._at_floor(theta)
        free = ~held
        ridge_used = False
        while True:
            solved, ridge_added = _solve_fisher_system(information[np.ix_(free, free)], gradient[free])
            ridge_used = ridge_used or ridge_added
            if solved is None:
                return None, ridge_used
            direction = np.zeros_like(theta)
            direction[free] = solved
            blocked = free & at_floor & (direction < 0)
            if not np.any(blocked):
                return direction, ridge_used
            free &= ~blocked

    def _line_search(self, theta: np.ndarray, direction: np.ndarray, log_likelihood: float):
        # likelihood values closer than their rounding error count as equal
        tolerance = LIKELIHOOD_ROUNDING * (abs(log_likelihood) + self.L * self.T)
        step = self.cfg.damping
        for _ in range(self.cfg.max_halvings):
            candidate = theta + step * direction
            candidate[self.n_mixing:] = np.maximum(candidate[self.n_mixing:], self.lambda_floor)
            evaluated = self._evaluate(candidate)
            if evaluated is not None and evaluated[0] >= log_likelihood - tolerance:
                return candidate, evaluated, step
            step /= 2
        return None


def fisher_scoring(
        obs: FrequencyObservations,
        spectra: List[SpectralProfile],
        init: ModelParams,
        cfg: Optional[ScoringConfig] = None,
) -> Tuple[ModelParams, ScoringTrace]:
    return FisherScoring(obs, spectra, cfg or ScoringConfig()).run(init)


def _reference_row(A_hat: np.ndarray, A_true: np.ndarray, column: int) -> Optional[int]:
    for row in range(A_hat.shape[0]):
        if abs(A_hat[row, column]) > SIGN_TOLERANCE and abs(A_true[row, column]) > SIGN_TOLERANCE:
            return row
    return None


def resolve_sign(A_hat: np.ndarray, A_true: np.ndarray) -> np.ndarray:
    """Xi * A_hat with Xi_lm = sign(A_hat[r, m] A[r, m]), r the first row (normally 0) with nonzero entries."""
    A_hat = np.asarray(A_hat, dtype=float)
    A_true = np.asarray(A_true, dtype=float)
    if A_hat.shape != A_true.shape:
        raise DimensionError(f'A_hat is {A_hat.shape} but A is {A_true.shape}')
    resolved = A_hat.copy()
    for column in range(A_hat.shape[1]):
        row = _reference_row(A_hat, A_true, column)
        if row is not None and A_hat[row, column] * A_true[row, column] < 0:
            resolved[:, column] = -resolved[:, column]
    return resolved


def resolve_sign_nonnegative(A_hat: np.ndarray) -> np.ndarray:
    """Orient every column so that its first significant entry is positive."""
    resolved = np.array(A_hat, dtype=float)
    scale = max(float(np.abs(resolved).max(initial=0.0)), np.finfo(float).tiny)
    for column in range(resolved.shape[1]):
        significant = np.flatnonzero(np.abs(resolved[:, column]) > SIGN_TOLERANCE * scale)
        if significant.size and resolved[significant[0], column] < 0:
            resolved[:, column] = -resolved[:, column]
    return resolved
