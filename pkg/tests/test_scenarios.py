#!/usr/bin/env python3
"""
Test script for the simulation scenarios
Checks optimal doses, the true Q surfaces and the data generators
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
from scipy import stats

from dose_finding.errors import DomainError, InputShapeError
from simulation.scenarios import (
    SCENARIOS,
    fopt_range,
    get_scenario,
    make_rng,
    optimal_dose,
    optimal_value,
    sample_covariates,
    sample_dataset,
    sample_truncated_normal,
    sample_truncated_normals,
    true_q,
    true_q_batch,
)


def test_optimal_doses():
    print("Testing optimal doses...")
    s1 = get_scenario(1)
    assert optimal_dose(s1, [0.5]) == 0.0
    assert optimal_dose(s1, [0.0]) == 1.0
    assert optimal_dose(s1, [1.0]) == 1.0

    assert optimal_dose(get_scenario(3), np.zeros(30)) == 1.0

    c = np.full(10, 0.3)
    c[0], c[3], c[6] = 0.5, 0.5, 0.0
    assert optimal_dose(get_scenario(4), c) == pytest.approx(0.85, abs=1e-15)
    assert optimal_dose(get_scenario(5), c) == pytest.approx(0.85, abs=1e-15)
    print("Optimal doses OK!\n")


def test_true_q():
    """Penalty term vanishes at the optimum; direct evaluations elsewhere."""
    print("Testing true Q...")
    rng = np.random.default_rng(30)
    for scenario_id, spec in SCENARIOS.items():
        lo, hi = spec.covariate_range
        c = rng.uniform(lo, hi, size=spec.p)
        q = true_q(spec, c, optimal_dose(spec, c))
        if scenario_id in (1, 2):
            expected = 0.0
        elif scenario_id == 3:
            expected = 8 + 4 * c[0] - 2 * c[1] - 2 * c[2]
        else:
            expected = 8 + 4 * np.cos(2 * np.pi * c[1]) - 2 * c[3] - 8 * c[4] ** 3
        assert q == pytest.approx(expected, abs=1e-12)

    assert true_q(get_scenario(1), [0.0], 0.5) == pytest.approx(-25.0)
    assert true_q(get_scenario(3), np.zeros(30), 0.0) == pytest.approx(-17.0)

    with pytest.raises(InputShapeError):
        true_q(get_scenario(4), np.zeros(3), 1.0)
    with pytest.raises(DomainError):
        true_q(get_scenario(1), [0.5], 1.5)
    with pytest.raises(DomainError):
        get_scenario(6)
    print("True Q OK!\n")


def test_grid_argmax_matches_optimal_dose():
    """argmax of Q over a 200-dose grid lands within one grid step of f_opt."""
    print("Testing f_opt against grid argmax of Q...")
    rng = np.random.default_rng(36)
    for scenario_id, spec in SCENARIOS.items():
        lo, hi = spec.dose_range
        grid = np.linspace(lo, hi, 200)
        grid_step = grid[1] - grid[0]
        worst = 0.0
        for c in sample_covariates(spec, 1000, rng):
            q = true_q_batch(spec, np.tile(c, (grid.size, 1)), grid)
            gap = abs(grid[int(np.argmax(q))] - optimal_dose(spec, c))
            worst = max(worst, gap)
            assert gap <= grid_step + 1e-12
        print(f"  scenario {scenario_id}: worst gap {worst:.4f} (step {grid_step:.4f})")
    print("Grid argmax OK!\n")


def test_scenario_two_stays_in_dose_range():
    low, high = fopt_range(get_scenario(2))
    print(f"  scenario 2 optimal dose range: [{low:.4f}, {high:.4f}]")
    assert 0.0 <= low < high <= 1.0
    assert fopt_range(get_scenario(3)) is None


def test_optimal_value_bounds_any_rule():
    rng = np.random.default_rng(31)
    spec = get_scenario(4)
    C = rng.uniform(-1, 1, size=(200, spec.p))
    best = optimal_value(spec, C)
    for _ in range(5):
        doses = rng.uniform(0, 2, size=200)
        values = [true_q(spec, c, a) for c, a in zip(C, doses)]
        assert np.mean(values) <= best


def test_reward_noise():
    """Scenario 1 rewards are Q plus N(0, 0.1^2)."""
    print("Testing reward noise...")
    spec = get_scenario(1)
    data = sample_dataset(spec, 1000, make_rng(7))
    residuals = np.array([r - true_q(spec, c, a) for c, a, r in zip(data.C, data.a, data.r)])
    print(f"  residual mean={residuals.mean():.4f} sd={residuals.std(ddof=1):.4f}")
    assert abs(residuals.mean()) <= 0.02
    assert 0.08 <= residuals.std(ddof=1) <= 0.12
    print("Reward noise OK!\n")


def test_observational_doses_center_on_optimum():
    spec = get_scenario(5)
    data = sample_dataset(spec, 5000, make_rng(8))
    assert np.all((data.a >= 0.0) & (data.a <= 2.0))

    f = np.array([optimal_dose(spec, c) for c in data.C])
    central = np.abs(f - 1.0) < 0.2
    assert central.sum() > 200
    assert abs(np.mean(data.a[central] - f[central])) < 0.05


def test_randomized_doses_are_uniform():
    spec = get_scenario(3)
    rejected = 0
    for seed in range(20):
        data = sample_dataset(spec, 500, make_rng(100 + seed))
        if stats.kstest(data.a / 2.0, 'uniform').pvalue < 0.01:
            rejected += 1
    assert rejected <= 1


def test_truncated_normal():
    print("Testing truncated normal sampler...")
    rng = make_rng(9)
    draws = sample_truncated_normals(np.ones(100_000), 0.0, 2.0, 0.5, rng)
    print(f"  mean of 1e5 draws: {draws.mean():.5f}")
    assert abs(draws.mean() - 1.0) <= 0.01
    assert np.all((draws >= 0.0) & (draws <= 2.0))

    far = sample_truncated_normals(np.full(1000, -10.0), 0.0, 2.0, 1.0, rng)
    assert np.all((far >= 0.0) & (far <= 2.0))
    assert far.mean() < 0.3

    narrow = [sample_truncated_normal(0.7, 0.0, 2.0, 1e-6, rng) for _ in range(100)]
    assert np.allclose(narrow, 0.7, atol=1e-4)

    with pytest.raises(DomainError):
        sample_truncated_normal(1.0, 2.0, 0.0, 0.5, rng)
    with pytest.raises(DomainError):
        sample_truncated_normal(1.0, 0.0, 2.0, 0.0, rng)
    print("Truncated normal OK!\n")


def test_streams_are_reproducible():
    spec = get_scenario(2)
    first = sample_dataset(spec, 50, make_rng(2018, 3, 0))
    second = sample_dataset(spec, 50, make_rng(2018, 3, 0))
    other = sample_dataset(spec, 50, make_rng(2018, 3, 1))
    assert np.array_equal(first.r, second.r) and np.array_equal(first.C, second.C)
    assert not np.array_equal(first.r, other.r)


def main():
    print("=" * 70)
    print("SCENARIO TEST SUITE")
    print("=" * 70)
    print()

    try:
        test_optimal_doses()
        test_true_q()
        test_grid_argmax_matches_optimal_dose()
        test_scenario_two_stays_in_dose_range()
        test_optimal_value_bounds_any_rule()
        test_reward_noise()
        test_observational_doses_center_on_optimum()
        test_randomized_doses_are_uniform()
        test_truncated_normal()
        test_streams_are_reproducible()

        print("=" * 70)
        print("ALL TESTS PASSED!")
        print("=" * 70)
    except AssertionError as e:
        print(f"\nTest failed: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
