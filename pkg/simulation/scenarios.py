"""
Dose Trial Scenarios
====================

Ground-truth simulators for the five benchmark dose-finding scenarios:

    id  p   covariates    doses   dose policy               reward noise sd
    1   1   U(0, 1)       [0, 1]  U(0, 1)                   0.1
    2   1   U(0, 1)       [0, 1]  U(0, 1)                   0.1
    3   30  U(-1, 1)      [0, 2]  U(0, 2)                   1.0
    4   10  U(-1, 1)      [0, 2]  U(0, 2)                   1.0
    5   10  U(-1, 1)      [0, 2]  TruncN(f_opt, 0, 2, 0.5)  1.0

Scenario 5 shares Q and f_opt with scenario 4; only the dose policy differs
(observational trial, doses concentrated near the optimum).

Random numbers come from numpy's counter-based Philox generator; streams are
derived from SeedSequence([base_seed, *stream_ids]) so a (seed, replication)
pair reproduces the same draws on every platform.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import special, stats

from dose_finding.errors import DomainError, InputShapeError
from dose_finding.gaussian_process import Dataset

logger = logging.getLogger(__name__)

# Below this acceptance probability rejection sampling switches to inverse CDF
MIN_ACCEPTANCE = 1e-3

TRUNCNORM_SD = 0.5


@dataclass(frozen=True)
class ScenarioSpec:
    """Fixed description of one scenario."""
    id: int
    p: int
    dose_range: Tuple[float, float]
    covariate_range: Tuple[float, float]
    noise_sd: float
    policy: str

    @property
    def name(self) -> str:
        return f"scenario {self.id}"


SCENARIOS: Dict[int, ScenarioSpec] = {
    1: ScenarioSpec(1, 1, (0.0, 1.0), (0.0, 1.0), 0.1, 'uniform'),
    2: ScenarioSpec(2, 1, (0.0, 1.0), (0.0, 1.0), 0.1, 'uniform'),
    3: ScenarioSpec(3, 30, (0.0, 2.0), (-1.0, 1.0), 1.0, 'uniform'),
    4: ScenarioSpec(4, 10, (0.0, 2.0), (-1.0, 1.0), 1.0, 'uniform'),
    5: ScenarioSpec(5, 10, (0.0, 2.0), (-1.0, 1.0), 1.0, 'truncated_normal'),
}


def get_scenario(scenario_id: int) -> ScenarioSpec:
    """Look up a scenario by id (1..5)."""
    if scenario_id not in SCENARIOS:
        raise DomainError(f"Invalid scenario id: {scenario_id} (expected 1..5)")
    return SCENARIOS[scenario_id]


def make_rng(base_seed: int, *stream_ids: int) -> np.random.Generator:
    """Philox generator for the stream (base_seed, *stream_ids)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(base_seed), *map(int, stream_ids)])))


def _covariate_matrix(spec: ScenarioSpec, C) -> np.ndarray:
    C = np.asarray(C, dtype=float)
    if C.ndim == 1:
        C = C.reshape(1, -1)
    if C.shape[1] != spec.p:
        raise InputShapeError(f"{spec.name} expects {spec.p} covariates, got {C.shape[1]}")
    lo, hi = spec.covariate_range
    if not np.all(np.isfinite(C)) or np.any(C < lo) or np.any(C > hi):
        raise DomainError(f"{spec.name} covariates must lie in [{lo}, {hi}]")
    return C


def runge(x):
    return np.cos(3.0 * np.pi * (4.0 * x - 0.3)) / (1.0 + 25.0 * (4.0 * x - 0.55) ** 2)


def step(x):
    return 0.1 * x * (10.0 + np.sin(20.0 * x) + np.sin(50.0 * x)) - 1.3


def _optimal_doses(spec: ScenarioSpec, C: np.ndarray) -> np.ndarray:
    if spec.id == 1:
        return 4.0 * (C[:, 0] - 0.5) ** 2
    if spec.id == 2:
        x = C[:, 0]
        # offset sign chosen so optimal doses stay inside [0, 1]; see DESIGN.md
        return (runge(x) + step(x) * (x > 0.5)) / 1.5 + 0.7
    if spec.id == 3:
        return 1.0 + 0.5 * C[:, 0] + 0.5 * C[:, 1]
    # 4 and 5
    return 0.6 * (np.abs(C[:, 0]) >= 0.5) + C[:, 3] ** 2 + 0.5 * np.log(np.abs(C[:, 6]) + 1.0)


def optimal_doses(spec: ScenarioSpec, C) -> np.ndarray:
    """f_opt for each covariate row."""
    return _optimal_doses(spec, _covariate_matrix(spec, C))


def optimal_dose(spec: ScenarioSpec, c) -> float:
    """
    True optimal dose f_opt(c).

    Args:
        spec: Scenario
        c: Covariate vector of length spec.p inside covariate_range

    Returns:
        Optimal dose
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    if c.size != spec.p:
        raise InputShapeError(f"{spec.name} expects {spec.p} covariates, got {c.size}")
    return float(optimal_doses(spec, c[None, :])[0])


def true_q_batch(spec: ScenarioSpec, C, a) -> np.ndarray:
    """Expected reward Q(c_j, a_j) for matching rows of C and entries of a."""
    C = _covariate_matrix(spec, C)
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.size != C.shape[0]:
        raise InputShapeError(f"got {C.shape[0]} covariate rows but {a.size} doses")
    lo, hi = spec.dose_range
    if not np.all(np.isfinite(a)) or np.any(a < lo) or np.any(a > hi):
        raise DomainError(f"{spec.name} doses must lie in [{lo}, {hi}]")

    f = _optimal_doses(spec, C)
    if spec.id in (1, 2):
        return -100.0 * (f - a) ** 2
    if spec.id == 3:
        return 8.0 + 4.0 * C[:, 0] - 2.0 * C[:, 1] - 2.0 * C[:, 2] - 25.0 * (f - a) ** 2
    return 8.0 + 4.0 * np.cos(2.0 * np.pi * C[:, 1]) - 2.0 * C[:, 3] - 8.0 * C[:, 4] ** 3 - 15.0 * np.abs(f - a)


def true_q(spec: ScenarioSpec, c, a: float) -> float:
    """Expected reward Q(c, a), maximized over a at optimal_dose(spec, c)."""
    c = np.asarray(c, dtype=float).reshape(1, -1)
    return float(true_q_batch(spec, c, [a])[0])


def optimal_value(spec: ScenarioSpec, C) -> float:
    """Mean of Q(c, f_opt(c)) over the rows of C, the best value any rule can reach."""
    C = _covariate_matrix(spec, C)
    return float(np.mean(true_q_batch(spec, C, _optimal_doses(spec, C))))


def sample_truncated_normal(mean: float, lo: float, hi: float, sd: float, rng: np.random.Generator) -> float:
    """
    One draw from N(mean, sd^2) conditioned on [lo, hi].

    Rejection sampling from the untruncated normal; when the acceptance
    probability is below MIN_ACCEPTANCE the draw uses the inverse CDF instead.
    """
    return float(sample_truncated_normals(np.array([mean], dtype=float), lo, hi, sd, rng)[0])


def sample_truncated_normals(means, lo: float, hi: float, sd: float, rng: np.random.Generator) -> np.ndarray:
    """Vector version of sample_truncated_normal, one draw per mean."""
    if not lo < hi:
        raise DomainError(f"truncation interval must satisfy lo < hi, got [{lo}, {hi}]")
    if not sd > 0:
        raise DomainError(f"sd must be > 0, got {sd}")

    means = np.asarray(means, dtype=float).reshape(-1)
    out = np.empty_like(means)
    alpha = (lo - means) / sd
    beta = (hi - means) / sd
    acceptance = special.ndtr(beta) - special.ndtr(alpha)

    use_inverse = acceptance < MIN_ACCEPTANCE
    if np.any(use_inverse):
        u = rng.uniform(size=int(np.sum(use_inverse)))
        out[use_inverse] = stats.truncnorm.ppf(
            u, alpha[use_inverse], beta[use_inverse], loc=means[use_inverse], scale=sd
        )

    pending = np.flatnonzero(~use_inverse)
    while pending.size:
        draws = means[pending] + sd * rng.standard_normal(pending.size)
        accepted = (draws >= lo) & (draws <= hi)
        out[pending[accepted]] = draws[accepted]
        pending = pending[~accepted]

    return np.clip(out, lo, hi)


def sample_covariates(spec: ScenarioSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """n x p covariates, i.i.d. uniform on covariate_range."""
    lo, hi = spec.covariate_range
    return rng.uniform(lo, hi, size=(n, spec.p))


def sample_dataset(spec: ScenarioSpec, n: int, rng: np.random.Generator) -> Dataset:
    """
    Draw n training records: covariates, then doses from the trial policy,
    then rewards R ~ N(Q(C, A), noise_sd^2).
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    C = sample_covariates(spec, n, rng)
    lo, hi = spec.dose_range
    if spec.policy == 'truncated_normal':
        a = sample_truncated_normals(_optimal_doses(spec, C), lo, hi, TRUNCNORM_SD, rng)
    else:
        a = rng.uniform(lo, hi, size=n)
    r = true_q_batch(spec, C, a) + spec.noise_sd * rng.standard_normal(n)
    return Dataset(C=C, a=a, r=r, dose_range=spec.dose_range)


def fopt_range(spec: ScenarioSpec, points: int = 10_000) -> Optional[Tuple[float, float]]:
    """Empirical (min, max) of f_opt over an even grid; single-covariate scenarios only."""
    if spec.p != 1:
        return None
    lo, hi = spec.covariate_range
    f = optimal_doses(spec, np.linspace(lo, hi, points)[:, None])
    return float(np.min(f)), float(np.max(f))
