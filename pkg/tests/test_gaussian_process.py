#!/usr/bin/env python3
"""
Test script for GP regression
Checks fit/predict against dense-inverse oracles, the marginal likelihood and
its gradient, and the multi-restart hyperparameter search
"""

import sys
import os

# Add parent directory to path
current_dir = os.path.dirname(os.path.abspath(__file__))
parent_dir = os.path.dirname(current_dir)
if parent_dir not in sys.path:
    sys.path.insert(0, parent_dir)

import numpy as np
import pytest

from dose_finding import gaussian_process
from dose_finding.errors import ConditioningError, DomainError, FittingError, InputShapeError
from dose_finding.gaussian_process import (
    Dataset,
    RewardScaler,
    build_model,
    factorize,
    fit,
    log_marginal_likelihood,
    optimize_hyperparameters,
    predict,
    predict_batch,
)
from dose_finding.kernel import Hyperparameters, cross_covariance, gram_matrix
from random_models import random_hyperparameters, random_model
from simulation.scenarios import get_scenario, make_rng, sample_dataset

IDENTITY = RewardScaler(r_min=0.0, r_max=1.0)


def test_single_point_fit_and_interpolation():
    """n = 1 without noise: weights y/sf2, chol sqrt(sf2), exact interpolation."""
    print("Testing single-point model...")
    hp = Hyperparameters(sigma_f2=1.5, theta=[0.3, 0.8], sigma_n2=0.0)
    model = build_model(np.array([[0.2, 0.4]]), np.array([0.7]), hp, IDENTITY, (0.0, 1.0))

    assert model.weights[0] == pytest.approx(0.7 / 1.5, rel=1e-15)
    assert model.chol[0, 0] == pytest.approx(np.sqrt(1.5), rel=1e-15)

    post = predict(model, [0.2, 0.4])
    print(f"  mean={post.mean:.12f} variance={post.variance:.3e}")
    assert post.mean == pytest.approx(0.7, abs=1e-12)
    assert post.variance == pytest.approx(0.0, abs=1e-12)
    print("Single-point model OK!\n")


def test_far_query_reverts_to_prior():
    rng = np.random.default_rng(3)
    model = random_model(rng, 12, 2)
    post = predict(model, [50.0, -50.0, 50.0])
    assert abs(post.mean) < 1e-10
    assert post.variance == pytest.approx(model.hp.sigma_f2, rel=1e-10)


def test_duplicate_inputs_with_nugget():
    """The nugget regularizes a rank-one Gram block."""
    data = Dataset(C=[[0.5], [0.5]], a=[0.3, 0.3], r=[1.0, 2.0], dose_range=(0.0, 1.0))
    model = fit(data, Hyperparameters(sigma_f2=1.0, theta=[1.0, 1.0], sigma_n2=0.01))
    assert model.n == 2
    assert np.all(np.isfinite(model.weights))


def test_residual_and_dense_oracle():
    """(K + sn2 I) w = y, and predictions match an explicit-inverse computation."""
    print("Testing against dense-inverse oracle...")
    rng = np.random.default_rng(4)
    model = random_model(rng, 20, 2)
    A = gram_matrix(model.X, model.hp)
    residual = A @ model.weights - model.y
    assert np.max(np.abs(residual)) < 1e-8

    model = random_model(rng, 15, 2)
    A_inv = np.linalg.inv(gram_matrix(model.X, model.hp))
    X_star = rng.uniform(0.0, 1.0, size=(10, 3))
    means, variances = predict_batch(model, X_star)
    for j, x_star in enumerate(X_star):
        k = cross_covariance(model.X, x_star, model.hp)
        mean = k @ A_inv @ model.y
        variance = model.hp.sigma_f2 - k @ A_inv @ k
        post = predict(model, x_star)
        assert abs(post.mean - mean) < 1e-8
        assert abs(post.variance - max(variance, 0.0)) < 1e-8
        assert means[j] == pytest.approx(post.mean, abs=1e-12)
        assert variances[j] == pytest.approx(post.variance, abs=1e-12)
    print("Dense-inverse oracle OK!\n")


def test_variance_never_increases_with_data():
    """Adding a training point never raises the posterior variance anywhere."""
    print("Testing variance monotonicity...")
    rng = np.random.default_rng(14)
    for _ in range(100):
        n, p = int(rng.integers(1, 21)), int(rng.integers(1, 3))
        hp = random_hyperparameters(rng, p + 1)
        X = rng.uniform(0.0, 1.0, size=(n + 1, p + 1))
        y = rng.uniform(0.0, 1.0, size=n + 1)
        smaller = build_model(X[:n], y[:n], hp, IDENTITY, (0.0, 1.0))
        larger = build_model(X, y, hp, IDENTITY, (0.0, 1.0))
        X_star = rng.uniform(-0.2, 1.2, size=(10, p + 1))
        _, before = predict_batch(smaller, X_star)
        _, after = predict_batch(larger, X_star)
        assert np.all(after <= before + 1e-8)
    print("Variance monotonicity OK!\n")


def test_target_scaling():
    """Targets times lambda: means times lambda, variances unchanged."""
    rng = np.random.default_rng(15)
    model = random_model(rng, 15, 2)
    X_star = rng.uniform(0.0, 1.0, size=(8, 3))
    means, variances = predict_batch(model, X_star)
    for lam in (0.3, 2.0, 17.5):
        scaled = build_model(model.X, lam * model.y, model.hp, IDENTITY, (0.0, 1.0))
        scaled_means, scaled_variances = predict_batch(scaled, X_star)
        assert np.allclose(scaled_means, lam * means, rtol=1e-10, atol=1e-12)
        assert np.array_equal(scaled_variances, variances)


def test_noise_free_interpolation():
    """With sn2 -> 0 the posterior mean passes through every target."""
    rng = np.random.default_rng(16)
    X = rng.uniform(0.0, 1.0, size=(8, 2))
    y = rng.uniform(0.0, 1.0, size=8)
    model = build_model(X, y, Hyperparameters(sigma_f2=1.0, theta=[0.05, 0.05], sigma_n2=1e-10), IDENTITY, (0.0, 1.0))
    means, variances = predict_batch(model, X)
    assert np.max(np.abs(means - y)) < 1e-6
    assert np.max(variances) < 1e-6


def test_log_marginal_likelihood_single_point():
    """n = 1, sf2 + sn2 = 1, y = 0 -> standard normal log density at 0."""
    data = Dataset(C=[[0.1]], a=[0.5], r=[0.0], dose_range=(0.0, 1.0))
    value, _ = log_marginal_likelihood(data, Hyperparameters(sigma_f2=0.6, theta=[1.0, 1.0], sigma_n2=0.4))
    assert value == pytest.approx(-0.5 * np.log(2.0 * np.pi), abs=1e-14)


def test_log_marginal_likelihood_gradient():
    """Analytic gradient against central differences in log space."""
    print("Testing marginal likelihood gradient...")
    rng = np.random.default_rng(5)
    step = 1e-5
    for _ in range(50):
        n, p = int(rng.integers(3, 16)), int(rng.integers(1, 4))
        data = Dataset(
            C=rng.uniform(-1, 1, size=(n, p)),
            a=rng.uniform(0, 1, size=n),
            r=rng.uniform(0, 1, size=n),
            dose_range=(0.0, 1.0),
        )
        hp = random_hyperparameters(rng, p + 1)
        _, grad = log_marginal_likelihood(data, hp)

        base = hp.to_log_vector()
        fd = np.empty_like(base)
        for i in range(base.size):
            up, down = base.copy(), base.copy()
            up[i] += step
            down[i] -= step
            f_up, _ = log_marginal_likelihood(data, Hyperparameters.from_log_vector(up))
            f_down, _ = log_marginal_likelihood(data, Hyperparameters.from_log_vector(down))
            fd[i] = (f_up - f_down) / (2.0 * step)
        assert np.allclose(grad, fd, rtol=1e-3, atol=1e-6), f"{grad} vs {fd}"
    print("Gradient OK!\n")


def test_log_marginal_likelihood_scaling_identity():
    """y -> 2y with sf2, sn2 -> 4x shifts the value by -n log 2 only."""
    rng = np.random.default_rng(6)
    n = 12
    C, a, r = rng.uniform(0, 1, size=(n, 2)), rng.uniform(0, 1, size=n), rng.uniform(0, 1, size=n)
    hp = Hyperparameters(sigma_f2=0.7, theta=[0.3, 0.9, 0.5], sigma_n2=0.05)
    hp4 = Hyperparameters(sigma_f2=2.8, theta=[0.3, 0.9, 0.5], sigma_n2=0.2)

    value, _ = log_marginal_likelihood(Dataset(C, a, r, (0.0, 1.0)), hp)
    value2, _ = log_marginal_likelihood(Dataset(C, a, 2.0 * r, (0.0, 1.0)), hp4)
    assert value2 - value == pytest.approx(-n * np.log(2.0), abs=1e-9)


def test_factorize_jitter_and_failure():
    A = np.ones((3, 3))
    L, jitter = factorize(A)
    assert jitter > 0
    assert np.allclose(L @ L.T, A + jitter * np.eye(3), atol=1e-12)

    with pytest.raises(ConditioningError) as info:
        factorize(-np.eye(3))
    assert "last jitter tried" in str(info.value)


def _scenario_one_data(n, seed):
    return sample_dataset(get_scenario(1), n, make_rng(seed))


def test_optimize_is_deterministic():
    print("Testing optimizer determinism...")
    data = _scenario_one_data(40, 11)
    first = optimize_hyperparameters(data, 3, np.random.default_rng(7))
    second = optimize_hyperparameters(data, 3, np.random.default_rng(7))
    assert first.log_ml == second.log_ml
    assert np.array_equal(first.hp.to_log_vector(), second.hp.to_log_vector())
    print(f"  selected {first.hp.describe()} (log_ml={first.log_ml:.4f})")
    print("Determinism OK!\n")


def test_warm_restart_does_not_decrease():
    data = _scenario_one_data(40, 12)
    best = optimize_hyperparameters(data, 3, np.random.default_rng(8))
    again = optimize_hyperparameters(data, 1, np.random.default_rng(9), initial_hp=best.hp)
    assert again.log_ml >= best.log_ml - 1e-8


def test_recovers_generating_hyperparameters():
    """Data drawn from a known GP: every log-hyperparameter lands within 1 of the truth."""
    print("Testing hyperparameter recovery...")
    rng = np.random.default_rng(10)
    n = 100
    truth = Hyperparameters(sigma_f2=1.0, theta=[0.5, 0.5], sigma_n2=0.01)
    X = rng.uniform(0.0, 3.0, size=(n, 2))
    # Latent draw plus noise is one draw from N(0, K + sn2 I)
    r = np.linalg.cholesky(gram_matrix(X, truth)) @ rng.standard_normal(n)
    data = Dataset(C=X[:, :1], a=X[:, 1], r=r, dose_range=(0.0, 3.0))

    model = optimize_hyperparameters(data, 5, np.random.default_rng(11))

    # Rewards are min-max scaled, so the variances of the truth scale with 1 / range^2
    span2 = (np.max(r) - np.min(r)) ** 2
    scaled_truth = Hyperparameters(sigma_f2=1.0 / span2, theta=[0.5, 0.5], sigma_n2=0.01 / span2)
    scaled = Dataset(C=data.C, a=data.a, r=model.y, dose_range=data.dose_range)
    truth_value, _ = log_marginal_likelihood(scaled, scaled_truth)
    print(f"  fitted {model.hp.describe()}")
    print(f"  log_ml fitted={model.log_ml:.4f} truth={truth_value:.4f}")
    assert model.log_ml >= truth_value - 1e-6
    log_errors = model.hp.to_log_vector() - scaled_truth.to_log_vector()
    print(f"  log errors: {np.round(log_errors, 3)}")
    assert np.all(np.abs(log_errors) <= 1.0)
    print("Recovery OK!\n")


def test_all_restarts_failing_raises(monkeypatch):
    def broken(*args, **kwargs):
        raise ConditioningError("forced", jitter=1e-6)

    monkeypatch.setattr(gaussian_process, "build_model", broken)
    data = _scenario_one_data(10, 13)
    with pytest.raises(FittingError) as info:
        optimize_hyperparameters(data, 2, np.random.default_rng(0))
    assert len(info.value.diagnostics) == 2


def test_dataset_validation():
    with pytest.raises(InputShapeError):
        Dataset(C=[[0.1], [0.2]], a=[0.5], r=[1.0, 2.0])
    with pytest.raises(DomainError):
        Dataset(C=[[0.1]], a=[1.5], r=[1.0], dose_range=(0.0, 1.0))
    with pytest.raises(DomainError):
        Dataset(C=[[np.nan]], a=[0.5], r=[1.0])
    with pytest.raises(DomainError):
        optimize_hyperparameters(_scenario_one_data(5, 1), 0, np.random.default_rng(0))


def test_reward_scaler():
    scaler = RewardScaler.fit([-3.0, 1.0, 5.0])
    assert np.allclose(scaler.transform([-3.0, 1.0, 5.0]), [0.0, 0.5, 1.0])
    assert scaler.inverse(0.25) == pytest.approx(-1.0)

    flat = RewardScaler.fit([2.0, 2.0])
    assert flat.degenerate
    assert np.all(flat.transform([2.0, 2.0]) == 0.5)


def main():
    print("=" * 70)
    print("GAUSSIAN PROCESS TEST SUITE")
    print("=" * 70)
    print()

    try:
        test_single_point_fit_and_interpolation()
        test_far_query_reverts_to_prior()
        test_duplicate_inputs_with_nugget()
        test_residual_and_dense_oracle()
        test_variance_never_increases_with_data()
        test_target_scaling()
        test_noise_free_interpolation()
        test_log_marginal_likelihood_single_point()
        test_log_marginal_likelihood_gradient()
        test_log_marginal_likelihood_scaling_identity()
        test_factorize_jitter_and_failure()
        test_optimize_is_deterministic()
        test_warm_restart_does_not_decrease()
        test_recovers_generating_hyperparameters()
        test_dataset_validation()
        test_reward_scaler()

        print("=" * 70)
        print("ALL TESTS PASSED!")
        print("=" * 70)
    except AssertionError as e:
        print(f"\nTest failed: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
