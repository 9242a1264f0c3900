"""
Gaussian Process Regression
===========================

Exact zero-mean GP regression over inputs x = [c, a]:

    mean     = k_*^T (K + sn2 I)^-1 y
    variance = sf2 - k_*^T (K + sn2 I)^-1 k_*

The nugget sn2 enters once, on the Gram diagonal (kernel.gram_matrix already
carries it). Test-point prior variance is the latent sf2, without nugget.

Hyperparameters are fitted by type-II maximum likelihood: multi-restart
L-BFGS-B on the log marginal likelihood in log-parameter space, with
analytic gradients.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, optimize

from .errors import ConditioningError, DomainError, FittingError, InputShapeError
from .kernel import Hyperparameters, cross_covariance, cross_covariance_matrix, gram_matrix, scaled_sq_distance

logger = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)

DEFAULT_JITTER_LADDER = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
DEFAULT_BOUNDS = (1e-6, 1e6)
DEFAULT_INIT_RANGE = (1e-2, 1e2)
DEFAULT_MAX_ITER = 200
DEFAULT_GTOL = 1e-6

# Objective value handed to L-BFGS-B when a trial point cannot be factorized
_FAILED_OBJECTIVE = 1e10


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Dataset:
    """
    Training records (c_i, a_i, r_i).

    Attributes:
        C: n x p covariate matrix
        a: n doses, all inside dose_range
        r: n rewards
        dose_range: (a_lo, a_hi)
    """
    C: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    dose_range: Tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        C = np.asarray(self.C, dtype=float)
        if C.ndim == 1:
            C = C.reshape(-1, 1)
        a = np.asarray(self.a, dtype=float).reshape(-1)
        r = np.asarray(self.r, dtype=float).reshape(-1)
        lo, hi = (float(v) for v in self.dose_range)

        if C.ndim != 2 or C.shape[0] < 1:
            raise InputShapeError(f"C must be an n x p matrix with n >= 1, got shape {C.shape}")
        if a.size != C.shape[0] or r.size != C.shape[0]:
            raise InputShapeError(
                f"C, a and r must have the same number of records, got {C.shape[0]}, {a.size}, {r.size}"
            )
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
            raise DomainError(f"dose_range must be a finite interval with lo < hi, got ({lo}, {hi})")
        for name, values in (('C', C), ('a', a), ('r', r)):
            if not np.all(np.isfinite(values)):
                raise DomainError(f"{name} contains non-finite values")
        outside = np.flatnonzero((a < lo) | (a > hi))
        if outside.size:
            raise DomainError(
                f"{outside.size} dose(s) outside dose range [{lo}, {hi}], first at record {outside[0]}: {a[outside[0]]}"
            )

        object.__setattr__(self, 'C', _readonly(C))
        object.__setattr__(self, 'a', _readonly(a))
        object.__setattr__(self, 'r', _readonly(r))
        object.__setattr__(self, 'dose_range', (lo, hi))

    @property
    def n(self) -> int:
        return int(self.a.size)

    @property
    def p(self) -> int:
        return int(self.C.shape[1])

    @property
    def inputs(self) -> np.ndarray:
        """n x (p + 1) matrix of rows [c_i, a_i]."""
        return np.column_stack([self.C, self.a])


@dataclass(frozen=True)
class RewardScaler:
    """Min-max reward scaling onto [0, 1]."""
    r_min: float
    r_max: float

    @classmethod
    def fit(cls, r: Sequence[float]) -> "RewardScaler":
        r = np.asarray(r, dtype=float)
        return cls(r_min=float(np.min(r)), r_max=float(np.max(r)))

    @property
    def degenerate(self) -> bool:
        return not self.r_max > self.r_min

    def transform(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.degenerate:
            return np.full_like(r, 0.5)
        return (r - self.r_min) / (self.r_max - self.r_min)

    def inverse(self, y):
        """Map scaled values back to reward units."""
        if self.degenerate:
            return self.r_min + 0.0 * np.asarray(y, dtype=float)
        return self.r_min + (self.r_max - self.r_min) * np.asarray(y, dtype=float)


@dataclass(frozen=True)
class Posterior:
    """Posterior of the latent response at one query point (scaled-reward units)."""
    mean: float
    variance: float

    @property
    def sd(self) -> float:
        return float(np.sqrt(self.variance))


@dataclass(frozen=True)
class FittedGP:
    """
    Immutable fitted model.

    chol is the lower Cholesky factor L of K + sn2 I (plus jitter, if any was
    needed) and weights = (K + sn2 I)^-1 y.
    """
    hp: Hyperparameters
    X: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    chol: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    scaler: RewardScaler
    log_ml: float
    dose_range: Tuple[float, float]
    jitter: float = 0.0

    @property
    def n(self) -> int:
        return int(self.y.size)

    @property
    def p(self) -> int:
        return self.hp.covariate_dim


def factorize(A: np.ndarray, jitter_ladder: Sequence[float] = DEFAULT_JITTER_LADDER) -> Tuple[np.ndarray, float]:
    """
    Lower Cholesky factor of a symmetric matrix with escalating jitter.

    On failure, eps * mean(diag(A)) is added to the diagonal for each eps in
    jitter_ladder in turn.

    Returns:
        (L, added_jitter) with L L^T = A + added_jitter * I

    Raises:
        ConditioningError: if the last rung still fails
    """
    try:
        return linalg.cholesky(A, lower=True, check_finite=True), 0.0
    except (linalg.LinAlgError, ValueError):
        pass

    scale = float(np.mean(np.diag(A)))
    eps = 0.0
    for eps in jitter_ladder:
        jitter = eps * scale
        try:
            L = linalg.cholesky(A + jitter * np.eye(A.shape[0]), lower=True, check_finite=True)
            logger.debug(f"Cholesky needed jitter {eps:.0e} x mean(diag)")
            return L, jitter
        except (linalg.LinAlgError, ValueError):
            continue
    raise ConditioningError("Gram matrix is not positive definite", jitter=eps)


def _log_ml_from_factor(L: np.ndarray, y: np.ndarray, weights: np.ndarray) -> float:
    n = y.size
    return float(-0.5 * y @ weights - np.sum(np.log(np.diag(L))) - 0.5 * n * LOG_2PI)


def build_model(
    X: np.ndarray,
    y: np.ndarray,
    hp: Hyperparameters,
    scaler: RewardScaler,
    dose_range: Tuple[float, float],
    jitter_ladder: Sequence[float] = DEFAULT_JITTER_LADDER,
) -> FittedGP:
    """
    Factorize K + sn2 I for already-scaled targets and assemble a FittedGP.

    fit() and model loading both go through here so a reloaded model
    reproduces the original's predictions exactly.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.size:
        raise InputShapeError(f"X has {X.shape[0]} rows but y has {y.size} entries")

    L, jitter = factorize(gram_matrix(X, hp), jitter_ladder)
    weights = linalg.cho_solve((L, True), y)

    return FittedGP(
        hp=hp,
        X=_readonly(X),
        y=_readonly(y),
        chol=_readonly(L),
        weights=_readonly(weights),
        scaler=scaler,
        log_ml=_log_ml_from_factor(L, y, weights),
        dose_range=(float(dose_range[0]), float(dose_range[1])),
        jitter=jitter,
    )


def fit(data: Dataset, hp: Hyperparameters, jitter_ladder: Sequence[float] = DEFAULT_JITTER_LADDER) -> FittedGP:
    """
    Fit a GP with fixed hyperparameters.

    Rewards are min-max scaled to [0, 1] before factorization.

    Args:
        data: Training records
        hp: Hyperparameters (theta of length p + 1)

    Returns:
        FittedGP
    """
    if hp.input_dim != data.p + 1:
        raise InputShapeError(f"theta has {hp.input_dim} entries but data has {data.p} covariates + dose")
    scaler = RewardScaler.fit(data.r)
    return build_model(data.inputs, scaler.transform(data.r), hp, scaler, data.dose_range, jitter_ladder)


def posterior_moments(model: FittedGP, K_star: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Posterior means and latent variances from an n x m block of cross-covariances.

    Each mean is the exactly rounded sum (math.fsum) of k_i * weights_i, so it
    equals the sum of the per-point contributions however they cancel. The
    variance is sf2 - ||L^-1 k||^2, clamped at 0.

    Returns:
        (means, variances), both of length m
    """
    K_star = np.asarray(K_star, dtype=float)
    if K_star.ndim == 1:
        K_star = K_star[:, None]
    terms = K_star * model.weights[:, None]
    means = np.array([math.fsum(column) for column in terms.T.tolist()])
    V = linalg.solve_triangular(model.chol, K_star, lower=True)
    variances = np.maximum(model.hp.sigma_f2 - np.einsum('ij,ij->j', V, V), 0.0)
    return means, variances


def predict(model: FittedGP, x_star) -> Posterior:
    """Posterior mean and latent variance at x_star = [c_*, a]."""
    means, variances = posterior_moments(model, cross_covariance(model.X, x_star, model.hp))
    return Posterior(mean=float(means[0]), variance=float(variances[0]))


def predict_batch(model: FittedGP, X_star) -> Tuple[np.ndarray, np.ndarray]:
    """
    Posterior means and latent variances for each row of X_star.

    Returns:
        (means, variances), both of length m
    """
    return posterior_moments(model, cross_covariance_matrix(model.X, X_star, model.hp))


def _log_ml_and_gradient(
    X: np.ndarray,
    y: np.ndarray,
    hp: Hyperparameters,
    jitter_ladder: Sequence[float],
) -> Tuple[float, np.ndarray]:
    n, d = X.shape
    A = gram_matrix(X, hp)
    L, _ = factorize(A, jitter_ladder)
    weights = linalg.cho_solve((L, True), y)
    value = _log_ml_from_factor(L, y, weights)

    # d logML / d phi = 0.5 * tr((w w^T - A^-1) dA/dphi)
    M = np.outer(weights, weights) - linalg.cho_solve((L, True), np.eye(n))
    K_f = A.copy()
    K_f[np.diag_indices_from(K_f)] = hp.sigma_f2
    MK = M * K_f

    grad = np.empty(d + 2)
    grad[0] = 0.5 * np.sum(MK)
    for i in range(d):
        D_i = scaled_sq_distance(X[:, i:i + 1], X[:, i:i + 1], np.ones(1))
        grad[1 + i] = 0.5 * np.sum(MK * D_i) / (2.0 * hp.theta[i])
    grad[-1] = 0.5 * hp.sigma_n2 * np.trace(M)
    return value, grad


def log_marginal_likelihood(
    data: Dataset,
    hp: Hyperparameters,
    jitter_ladder: Sequence[float] = DEFAULT_JITTER_LADDER,
) -> Tuple[float, np.ndarray]:
    """
    Log evidence of the rewards in data (taken as already scaled) and its gradient.

    Args:
        data: Dataset whose r are used as targets without rescaling
        hp: Hyperparameters

    Returns:
        (value, gradient) where gradient is w.r.t.
        [log sf2, log theta_1..d, log sn2]
    """
    if hp.input_dim != data.p + 1:
        raise InputShapeError(f"theta has {hp.input_dim} entries but data has {data.p} covariates + dose")
    return _log_ml_and_gradient(data.inputs, np.asarray(data.r, dtype=float), hp, jitter_ladder)


def optimize_hyperparameters(
    data: Dataset,
    restarts: int,
    rng: np.random.Generator,
    bounds: Tuple[float, float] = DEFAULT_BOUNDS,
    init_range: Tuple[float, float] = DEFAULT_INIT_RANGE,
    max_iter: int = DEFAULT_MAX_ITER,
    gtol: float = DEFAULT_GTOL,
    jitter_ladder: Sequence[float] = DEFAULT_JITTER_LADDER,
    initial_hp: Optional[Hyperparameters] = None,
) -> FittedGP:
    """
    Type-II maximum likelihood with multiple random restarts.

    Each restart runs bound-constrained L-BFGS-B from a log-uniform random
    initialization in init_range (the first restart starts at initial_hp when
    given). The model with the highest log marginal likelihood wins; ties go
    to the lowest restart index.

    Args:
        data: Raw training data (rewards are scaled here)
        restarts: Number of independent ascents (>= 1)
        rng: Seeded generator; all initializations are drawn up front

    Returns:
        Best FittedGP

    Raises:
        FittingError: if every restart fails
    """
    if restarts < 1:
        raise DomainError(f"restarts must be >= 1, got {restarts}")

    scaler = RewardScaler.fit(data.r)
    X = data.inputs
    y = scaler.transform(data.r)
    n_params = X.shape[1] + 2

    log_lo, log_hi = np.log(bounds[0]), np.log(bounds[1])
    starts = rng.uniform(np.log(init_range[0]), np.log(init_range[1]), size=(restarts, n_params))
    if initial_hp is not None:
        starts[0] = np.clip(initial_hp.to_log_vector(), log_lo, log_hi)

    def negative_objective(log_params):
        try:
            value, grad = _log_ml_and_gradient(X, y, Hyperparameters.from_log_vector(log_params), jitter_ladder)
        except ConditioningError:
            return _FAILED_OBJECTIVE, np.zeros_like(log_params)
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            return _FAILED_OBJECTIVE, np.zeros_like(log_params)
        return -value, -grad

    best: Optional[FittedGP] = None
    diagnostics: List[str] = []

    for index, start in enumerate(starts):
        try:
            result = optimize.minimize(
                negative_objective,
                start,
                jac=True,
                method='L-BFGS-B',
                bounds=[(log_lo, log_hi)] * n_params,
                options={'maxiter': max_iter, 'gtol': gtol},
            )
            candidate = build_model(
                X, y, Hyperparameters.from_log_vector(result.x), scaler, data.dose_range, jitter_ladder
            )
        except (ConditioningError, DomainError, linalg.LinAlgError, ValueError) as e:
            diagnostics.append(f"restart {index}: {type(e).__name__}: {e}")
            logger.debug(diagnostics[-1])
            continue

        if not np.isfinite(candidate.log_ml):
            diagnostics.append(f"restart {index}: non-finite log marginal likelihood")
            continue

        logger.debug(f"restart {index}: log_ml={candidate.log_ml:.6f} ({result.message})")
        if best is None or candidate.log_ml > best.log_ml:
            best = candidate

    if best is None:
        raise FittingError(f"all {restarts} hyperparameter restarts failed", diagnostics)

    logger.debug(f"selected hyperparameters: {best.hp.describe()} (log_ml={best.log_ml:.6f})")
    return best
