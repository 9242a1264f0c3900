"""
ARD Squared-Exponential Kernel
==============================

Covariance function with one squared length-scale per input dimension and a
nugget on the diagonal:

    k(x_p, x_q) = sf2 * exp(-sum_i (x_pi - x_qi)^2 / (2 * theta_i)) + sn2 * delta_pq

Inputs are rows [c_1, ..., c_p, a]: covariates first, dose last. theta_i is a
squared length-scale, i.e. theta_i = l_i^2 in the usual exp(-r^2 / (2 l^2)) form.

delta_pq is structural: the nugget is added on the diagonal of a Gram matrix
over one point set, never by comparing coordinates.
"""

from dataclasses import dataclass, field
from typing import Sequence, Tuple, Union

import numpy as np

from .errors import DomainError, InputShapeError

ArrayLike = Union[np.ndarray, Sequence[float]]


@dataclass(frozen=True)
class Hyperparameters:
    """
    Kernel hyperparameters.

    Attributes:
        sigma_f2: Signal variance (> 0)
        theta: Squared length-scales, one per input dimension, dose last (each > 0)
        sigma_n2: Noise variance (>= 0)
    """
    sigma_f2: float
    theta: np.ndarray = field(repr=False)
    sigma_n2: float

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        theta.setflags(write=False)
        object.__setattr__(self, 'theta', theta)
        object.__setattr__(self, 'sigma_f2', float(self.sigma_f2))
        object.__setattr__(self, 'sigma_n2', float(self.sigma_n2))

        if theta.size == 0:
            raise InputShapeError("theta must have at least one entry (the dose length-scale)")
        if not np.isfinite(self.sigma_f2) or self.sigma_f2 <= 0:
            raise DomainError(f"sigma_f2 must be finite and > 0, got {self.sigma_f2}")
        if not np.isfinite(self.sigma_n2) or self.sigma_n2 < 0:
            raise DomainError(f"sigma_n2 must be finite and >= 0, got {self.sigma_n2}")
        # +inf length-scales are allowed: the dimension is then ignored
        if np.any(np.isnan(theta)) or np.any(theta <= 0):
            raise DomainError(f"every theta_i must be > 0, got {theta.tolist()}")

    @property
    def input_dim(self) -> int:
        """d = p + 1."""
        return int(self.theta.size)

    @property
    def covariate_dim(self) -> int:
        """p, the number of covariates."""
        return int(self.theta.size) - 1

    @property
    def theta_dose(self) -> float:
        return float(self.theta[-1])

    def to_log_vector(self) -> np.ndarray:
        """[log sf2, log theta_1..d, log sn2], the optimizer's parameterization."""
        return np.concatenate(([np.log(self.sigma_f2)], np.log(self.theta), [np.log(self.sigma_n2)]))

    @classmethod
    def from_log_vector(cls, log_params: ArrayLike) -> "Hyperparameters":
        log_params = np.asarray(log_params, dtype=float)
        return cls(
            sigma_f2=float(np.exp(log_params[0])),
            theta=np.exp(log_params[1:-1]),
            sigma_n2=float(np.exp(log_params[-1])),
        )

    def describe(self) -> str:
        theta_txt = ", ".join(f"{t:.4g}" for t in self.theta)
        return f"sigma_f2={self.sigma_f2:.4g}, theta=[{theta_txt}], sigma_n2={self.sigma_n2:.4g}"


def _as_matrix(X: ArrayLike, hp: Hyperparameters, name: str) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != hp.input_dim:
        raise InputShapeError(
            f"{name} must have {hp.input_dim} columns (p covariates + dose), got shape {X.shape}"
        )
    if X.shape[0] < 1:
        raise InputShapeError(f"{name} must contain at least one row")
    if not np.all(np.isfinite(X)):
        raise DomainError(f"{name} contains non-finite values")
    return X


def _as_vector(x: ArrayLike, hp: Hyperparameters, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != hp.input_dim:
        raise InputShapeError(f"{name} must have length {hp.input_dim}, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{name} contains non-finite values")
    return x


def scaled_sq_distance(A: np.ndarray, B: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """
    Length-scale weighted squared distances sum_i (a_i - b_i)^2 / theta_i.

    Accumulated one dimension at a time so memory stays at len(A) x len(B)
    even for 30+ covariates, and (a - b)^2 == (b - a)^2 keeps A == B results
    exactly symmetric.

    Args:
        A: m x k matrix
        B: n x k matrix
        theta: k squared length-scales

    Returns:
        m x n matrix of weighted squared distances
    """
    D = np.zeros((A.shape[0], B.shape[0]))
    for i in range(A.shape[1]):
        if np.isinf(theta[i]):
            continue
        diff = A[:, i, None] - B[None, :, i]
        D += diff * diff / theta[i]
    return D


def kernel_eval(x_p: ArrayLike, x_q: ArrayLike, hp: Hyperparameters, same_point: bool = False) -> float:
    """
    Evaluate k(x_p, x_q).

    Args:
        x_p, x_q: Input vectors of length d
        hp: Hyperparameters
        same_point: True only for a Gram diagonal entry (adds the nugget)

    Returns:
        Covariance value in (0, sf2 + sn2]
    """
    x_p = _as_vector(x_p, hp, "x_p")
    x_q = _as_vector(x_q, hp, "x_q")
    d2 = scaled_sq_distance(x_p[None, :], x_q[None, :], hp.theta)[0, 0]
    value = hp.sigma_f2 * np.exp(-0.5 * d2)
    if same_point:
        value += hp.sigma_n2
    return float(value)


def gram_matrix(X: ArrayLike, hp: Hyperparameters) -> np.ndarray:
    """
    Gram matrix K_ij = k(x_i, x_j) over one point set, nugget on the diagonal.

    Args:
        X: n x d input matrix
        hp: Hyperparameters

    Returns:
        Symmetric n x n matrix with diagonal sf2 + sn2
    """
    X = _as_matrix(X, hp, "X")
    K = hp.sigma_f2 * np.exp(-0.5 * scaled_sq_distance(X, X, hp.theta))
    K[np.diag_indices_from(K)] = hp.sigma_f2 + hp.sigma_n2
    return K


def cross_covariance_matrix(X_train: ArrayLike, X_star: ArrayLike, hp: Hyperparameters) -> np.ndarray:
    """
    Cross-covariances between training rows and query rows (no nugget).

    Formed as (covariate factor) * (dose factor), the same product the dose
    search builds, so both give bit-identical covariance vectors.

    Returns:
        n x m matrix with entry (i, j) = k(x_i, x*_j)
    """
    X_train = _as_matrix(X_train, hp, "X_train")
    X_star = _as_matrix(X_star, hp, "X_star")
    p = hp.covariate_dim
    covariate_part = hp.sigma_f2 * np.exp(-0.5 * scaled_sq_distance(X_train[:, :p], X_star[:, :p], hp.theta[:p]))
    dose_part = np.exp(-0.5 * scaled_sq_distance(X_train[:, p:], X_star[:, p:], hp.theta[p:]))
    return covariate_part * dose_part


def cross_covariance(X_train: ArrayLike, x_star: ArrayLike, hp: Hyperparameters) -> np.ndarray:
    """k_* = (k(x_*, x_1), ..., k(x_*, x_n)) for a single query point."""
    x_star = _as_vector(x_star, hp, "x_star")
    return cross_covariance_matrix(X_train, x_star[None, :], hp)[:, 0]


def separable_factors(x_p: ArrayLike, x_q: ArrayLike, hp: Hyperparameters) -> Tuple[float, float]:
    """
    Split the nugget-free kernel into its covariate and dose factors.

    Returns:
        (sf2 * exp(-||c_p - c_q||^2_theta / 2), exp(-(a_p - a_q)^2 / (2 theta_d)))
        whose product equals kernel_eval(x_p, x_q, hp, same_point=False).
    """
    x_p = _as_vector(x_p, hp, "x_p")
    x_q = _as_vector(x_q, hp, "x_q")
    p = hp.covariate_dim
    cov_d2 = scaled_sq_distance(x_p[None, :p], x_q[None, :p], hp.theta[:p])[0, 0]
    dose_d2 = (x_p[p] - x_q[p]) ** 2 / hp.theta_dose
    return float(hp.sigma_f2 * np.exp(-0.5 * cov_d2)), float(np.exp(-0.5 * dose_d2))
