"""
Simulation Module
=================

Ground-truth dose trial scenarios and the replicated experiment harness.

Modules:
    - scenarios: Scenario table, optimal doses, true Q and data generation
    - harness: Replications, aggregation and penalty sweeps
"""

from .scenarios import (
    ScenarioSpec,
    SCENARIOS,
    get_scenario,
    make_rng,
    optimal_dose,
    true_q,
    sample_dataset,
    sample_truncated_normal,
)

from .harness import (
    ExperimentConfig,
    ExperimentSummary,
    run_replication,
    run_experiment,
    penalty_sweep,
)

__all__ = [
    "ScenarioSpec",
    "SCENARIOS",
    "get_scenario",
    "make_rng",
    "optimal_dose",
    "true_q",
    "sample_dataset",
    "sample_truncated_normal",
    "ExperimentConfig",
    "ExperimentSummary",
    "run_replication",
    "run_experiment",
    "penalty_sweep",
]
