"""
Lower Confidence Surface Dose Rule
==================================

For a new patient with covariates c_*, recommend

    a_* = argmax_a  mean(c_*, a) - s * sd(c_*, a)

over the admissible dose interval, where mean/sd come from the fitted GP and
s = PHI^-1(percentile / 100).

Because the kernel factorizes into a covariate part and a dose part, both
terms are sums of exponentials in a once c_* is fixed:

    mean(a)     = sum_i alpha_i e_i(a)
    variance(a) = sf2 - ||B e(a)||^2,   B = L^-1 diag(sf2 w)
    e_i(a)      = exp(-(a - a_i)^2 / (2 theta_d))

DoseCoefficients holds alpha, the covariate factors sf2 w and the training
doses. Seed doses are scored once per subject and shared by every penalty.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg, optimize
from scipy.stats import qmc

from .errors import DomainError, InputShapeError
from .gaussian_process import FittedGP, posterior_moments, predict
from .kernel import cross_covariance, scaled_sq_distance

logger = logging.getLogger(__name__)

SEEDING_STRATEGIES = ('grid', 'uniform', 'sobol')

# Acklam's rational approximation, lower region and central region
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425
_MAX_HALLEY_EXPONENT = 700.0


def _lower_half_quantile(p: float) -> float:
    """Quantile for 0 < p <= 0.5: rational approximation plus one Halley step."""
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    else:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
            (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)

    # Halley refinement against the erfc-based CDF takes 1e-9 down to ~1e-15;
    # skipped in the far tail where exp(x^2 / 2) overflows
    if 0.5 * x * x > _MAX_HALLEY_EXPONENT:
        return x
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def inverse_normal_cdf(p: float) -> float:
    """
    Standard normal quantile PHI^-1(p).

    Upper-half probabilities are mirrored onto the lower half, so
    PHI^-1(1 - p) = -PHI^-1(p) holds by construction.

    Raises:
        DomainError: if p is not strictly inside (0, 1)
    """
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {p}")
    if p > 0.5:
        return -_lower_half_quantile(1.0 - p)
    return _lower_half_quantile(p)


@dataclass(frozen=True)
class PenaltySpec:
    """Uncertainty penalty s = PHI^-1(percentile / 100)."""
    percentile: int
    s: float = field(init=False)

    def __post_init__(self):
        if int(self.percentile) != self.percentile or not 50 <= self.percentile <= 99:
            raise DomainError(f"percentile must be an integer in [50, 99], got {self.percentile}")
        object.__setattr__(self, 'percentile', int(self.percentile))
        s = 0.0 if self.percentile == 50 else inverse_normal_cdf(self.percentile / 100.0)
        object.__setattr__(self, 's', s)


@dataclass(frozen=True)
class DoseCoefficients:
    """
    Sum-of-exponentials representation of mean and variance along the dose axis.

    covariate_factors holds sf2 * w_i, so k_*(a) = covariate_factors * e(a)
    elementwise. The variance goes through the model's Cholesky factor,
    sf2 - ||B e(a)||^2 with B = L^-1 diag(sf2 w); Lambda is never formed.
    """
    alpha: np.ndarray = field(repr=False)
    covariate_factors: np.ndarray = field(repr=False)
    k_star_star: float
    train_doses: np.ndarray = field(repr=False)
    theta_dose: float
    model: FittedGP = field(repr=False, compare=False)

    @property
    def factor(self) -> np.ndarray:
        """B = L^-1 diag(sf2 w), n x n."""
        return linalg.solve_triangular(self.model.chol, np.diag(self.covariate_factors), lower=True)

    @property
    def gamma(self) -> np.ndarray:
        """gamma = B^T B, so that variance(a) = sf2 - e(a)^T gamma e(a)."""
        B = self.factor
        return B.T @ B

    def dose_factors(self, doses) -> np.ndarray:
        """m x n matrix e_i(a) for each requested dose."""
        doses = np.atleast_1d(np.asarray(doses, dtype=float))
        d2 = scaled_sq_distance(self.train_doses[:, None], doses[:, None], np.array([self.theta_dose]))
        return np.exp(-0.5 * d2).T

    def cross_covariances(self, doses) -> np.ndarray:
        """n x m block k_*(a) for each requested dose."""
        return self.covariate_factors[:, None] * self.dose_factors(doses).T

    def mean_and_variance(self, doses) -> Tuple[np.ndarray, np.ndarray]:
        """
        Posterior mean and clamped latent variance at each dose.

        Doses are solved one at a time, the same single-column solve predict()
        does, so both agree to the last bit even when sf2 - ||B e||^2 cancels.
        """
        K = self.cross_covariances(doses)
        means = np.empty(K.shape[1])
        variances = np.empty(K.shape[1])
        for j in range(K.shape[1]):
            column_mean, column_variance = posterior_moments(self.model, K[:, j])
            means[j], variances[j] = column_mean[0], column_variance[0]
        return means, variances


@dataclass(frozen=True)
class DoseRecommendation:
    """
    Recommended dose and the surface values there (scaled-reward units).

    grid_argmax is the best seed before any local refinement.
    """
    dose: float
    objective: float
    mean: float
    sd: float
    grid_argmax: float
    s: float = 0.0


def _covariate_vector(model: FittedGP, c_star) -> np.ndarray:
    c_star = np.asarray(c_star, dtype=float).reshape(-1)
    if c_star.size != model.p:
        raise InputShapeError(f"c_star must have {model.p} covariates, got {c_star.size}")
    if not np.all(np.isfinite(c_star)):
        raise DomainError("c_star contains non-finite values")
    return c_star


def dose_coefficients(model: FittedGP, c_star) -> DoseCoefficients:
    """
    Build the dose-axis coefficients for a fixed covariate vector.

    alpha_i   = sf2 * w_i * [Lambda y]_i
    gamma_ij  = sf2^2 * Lambda_ij * w_i * w_j   (exposed as B^T B)
    w_i       = exp(-||c_* - c_i||^2_theta / 2)  (covariate dimensions only)

    Args:
        model: Fitted GP
        c_star: Covariate vector of length p
    """
    c_star = _covariate_vector(model, c_star)
    p = model.p
    hp = model.hp

    d2 = scaled_sq_distance(model.X[:, :p], c_star[None, :], hp.theta[:p])[:, 0]
    covariate_factors = hp.sigma_f2 * np.exp(-0.5 * d2)

    return DoseCoefficients(
        alpha=covariate_factors * model.weights,
        covariate_factors=covariate_factors,
        k_star_star=hp.sigma_f2,
        train_doses=np.array(model.X[:, p]),
        theta_dose=hp.theta_dose,
        model=model,
    )


def lcsl_objective(coeffs: DoseCoefficients, a: Union[float, np.ndarray], s: float) -> Union[float, np.ndarray]:
    """Lower confidence surface mean - s * sd at dose(s) a."""
    means, variances = coeffs.mean_and_variance(a)
    values = means - s * np.sqrt(variances)
    if np.ndim(a) == 0:
        return float(values[0])
    return values


def _objective_gradient(coeffs: DoseCoefficients, a: float, s: float) -> Tuple[float, float]:
    k = coeffs.cross_covariances(a)[:, 0]
    dk = k * (coeffs.train_doses - a) / coeffs.theta_dose
    means, variances = posterior_moments(coeffs.model, k)
    sd = math.sqrt(variances[0])
    d_mean = float(dk @ coeffs.model.weights)

    # d/da ||L^-1 k||^2 = 2 (L^-1 k) . (L^-1 dk)
    V = linalg.solve_triangular(coeffs.model.chol, np.column_stack([k, dk]), lower=True)
    d_var = -2.0 * float(V[:, 0] @ V[:, 1])
    d_sd = d_var / (2.0 * sd) if sd > 1e-12 else 0.0
    return float(means[0]) - s * sd, d_mean - s * d_sd


def dose_seeds(
    dose_range: Tuple[float, float],
    count: int,
    seeding: str = 'grid',
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """
    Ascending seed doses for the global search, both endpoints always included.

    Args:
        dose_range: (lo, hi)
        count: Number of seeds (>= 2)
        seeding: 'grid' (equal steps), 'uniform' (random) or 'sobol'
        rng: Generator for the random strategies
    """
    lo, hi = dose_range
    if count < 2:
        raise DomainError(f"grid_size must be >= 2, got {count}")
    if seeding == 'grid':
        return np.linspace(lo, hi, count)
    if seeding not in SEEDING_STRATEGIES:
        raise DomainError(f"unknown seeding {seeding!r}, expected one of {SEEDING_STRATEGIES}")

    if rng is None:
        rng = np.random.Generator(np.random.Philox(0))
    interior = count - 2
    if seeding == 'uniform':
        u = rng.uniform(0.0, 1.0, size=interior)
    elif interior:
        # Sobol balance warnings for non power-of-two counts are expected here
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            u = qmc.Sobol(d=1, scramble=True, seed=rng).random(interior)[:, 0]
    else:
        u = np.empty(0)
    return np.sort(np.concatenate(([lo, hi], lo + (hi - lo) * u)))


def _select_dose(
    coeffs: DoseCoefficients,
    seeds: np.ndarray,
    means: np.ndarray,
    sds: np.ndarray,
    s: float,
    refine: bool,
) -> DoseRecommendation:
    values = means - s * sds
    best = int(np.argmax(values))
    grid_dose = float(seeds[best])
    dose, objective = grid_dose, float(values[best])
    mean, sd = float(means[best]), float(sds[best])

    if refine:
        bracket = (float(seeds[max(best - 1, 0)]), float(seeds[min(best + 1, seeds.size - 1)]))

        def negative(a):
            value, grad = _objective_gradient(coeffs, float(a[0]), s)
            return -value, np.array([-grad])

        result = optimize.minimize(negative, [grid_dose], jac=True, method='L-BFGS-B', bounds=[bracket])
        candidate = float(np.clip(result.x[0], *bracket))
        candidate_mean, candidate_variance = coeffs.mean_and_variance(candidate)
        candidate_sd = float(np.sqrt(candidate_variance[0]))
        candidate_value = float(candidate_mean[0]) - s * candidate_sd
        if candidate_value > objective:
            dose, objective = candidate, candidate_value
            mean, sd = float(candidate_mean[0]), candidate_sd

    return DoseRecommendation(dose=dose, objective=objective, mean=mean, sd=sd, grid_argmax=grid_dose, s=s)


def recommend_dose(
    model: FittedGP,
    c_star,
    penalty: PenaltySpec,
    grid_size: int = 50,
    refine: bool = False,
    seeding: str = 'grid',
    rng: Optional[np.random.Generator] = None,
) -> DoseRecommendation:
    """
    Maximize the lower confidence surface over the dose interval.

    The objective is evaluated at every seed; the first maximal seed (the
    smallest dose among ties) wins. With refine, L-BFGS-B runs from that
    seed inside the bracket formed by its neighbouring seeds and its result is
    kept only if it improves on the seed.

    Args:
        model: Fitted GP
        c_star: Covariate vector
        penalty: PenaltySpec
        grid_size: Number of seeds (>= 2)
        refine: Run the local search after seeding
        seeding: 'grid', 'uniform' or 'sobol'
        rng: Generator for random seeding strategies

    Returns:
        DoseRecommendation
    """
    table = recommend_dose_table(model, [c_star], [penalty], grid_size, refine, seeding, rng)
    return table[penalty.percentile][0]


def recommend_dose_table(
    model: FittedGP,
    C_star,
    penalties: Sequence[PenaltySpec],
    grid_size: int = 50,
    refine: bool = False,
    seeding: str = 'grid',
    rng: Optional[np.random.Generator] = None,
) -> Dict[int, List[DoseRecommendation]]:
    """
    recommend_dose for every row of C_star under several penalties.

    Each row draws its seeds once (consuming rng in row order) and the
    posterior is evaluated there once; every penalty then ranks the same
    seeds. The result equals calling recommend_dose per penalty with a fresh
    rng in the same state.

    Returns:
        {percentile: recommendations in row order}
    """
    C_star = np.asarray(C_star, dtype=float)
    if C_star.ndim == 1:
        C_star = C_star.reshape(-1, model.p)
    table: Dict[int, List[DoseRecommendation]] = {penalty.percentile: [] for penalty in penalties}

    for c_star in C_star:
        coeffs = dose_coefficients(model, c_star)
        seeds = dose_seeds(model.dose_range, grid_size, seeding, rng)
        means, variances = coeffs.mean_and_variance(seeds)
        sds = np.sqrt(variances)
        for penalty in penalties:
            table[penalty.percentile].append(_select_dose(coeffs, seeds, means, sds, penalty.s, refine))
    return table


def recommend_doses(
    model: FittedGP,
    C_star,
    penalty: PenaltySpec,
    grid_size: int = 50,
    refine: bool = False,
    seeding: str = 'grid',
    rng: Optional[np.random.Generator] = None,
) -> List[DoseRecommendation]:
    """recommend_dose for each row of C_star."""
    return recommend_dose_table(model, C_star, [penalty], grid_size, refine, seeding, rng)[penalty.percentile]


def _ranked(values: np.ndarray, k: int) -> List[Tuple[int, float]]:
    if not 1 <= k <= values.size:
        raise DomainError(f"k must lie in [1, {values.size}], got {k}")
    order = np.lexsort((np.arange(values.size), -np.abs(values)))
    return [(int(i), float(values[i])) for i in order[:k]]


def explain(model: FittedGP, c_star, a: float, k: int) -> List[Tuple[int, float]]:
    """
    Training points ranked by their additive share of the posterior mean.

    contribution_i = k(x_*, x_i) * [Lambda y]_i. math.fsum over all n
    contributions equals predict().mean at [c_*, a] exactly. Sorted by
    |contribution| descending, ties by index.

    Returns:
        Top-k list of (training index, contribution)
    """
    x_star = np.append(_covariate_vector(model, c_star), float(a))
    contributions = cross_covariance(model.X, x_star, model.hp) * model.weights
    return _ranked(contributions, k)


def explain_variance(model: FittedGP, c_star, a: float, k: int) -> List[Tuple[int, float]]:
    """
    Training points ranked by their share of the variance reduction.

    term_i = k_i * [Lambda k_*]_i; the terms sum to sf2 - variance
    (before clamping).
    """
    x_star = np.append(_covariate_vector(model, c_star), float(a))
    k_star = cross_covariance(model.X, x_star, model.hp)
    terms = k_star * linalg.cho_solve((model.chol, True), k_star)
    return _ranked(terms, k)


def feature_relevances(model: FittedGP) -> np.ndarray:
    """ARD relevances 1 / theta_i, covariates first, dose last."""
    return 1.0 / np.asarray(model.hp.theta, dtype=float)


def objective_via_predict(model: FittedGP, c_star, a: float, s: float) -> float:
    """mean - s * sd computed through predict(); reference path for the coefficient form."""
    post = predict(model, np.append(_covariate_vector(model, c_star), float(a)))
    return post.mean - s * post.sd


def relevance_table(model: FittedGP, names: Optional[Sequence[str]] = None) -> List[Tuple[str, float]]:
    """(dimension name, relevance) pairs; default names C1..Cp, dose."""
    relevances = feature_relevances(model)
    if names is None:
        names = [f"C{i + 1}" for i in range(model.p)] + ['dose']
    return [(str(name), float(value)) for name, value in zip(names, relevances)]
