"""
Experiment Harness
==================

Replicated simulation protocol:

    for each train size, for each replication:
        draw a training set, scale rewards to [0, 1], fit the GP with restarts,
        draw n_test fresh covariate vectors, recommend a dose for each,
        score the recommendations with the true Q and average -> vhat

Every percentile in a run is scored on the same fitted model and the same test
draw (paired design), so a penalty sweep isolates the effect of s.

Replication seeds follow one rule:

    rep_seed = SeedSequence([base_seed, scenario_id, n_train, replication]).generate_state(1)[0]

and each replication splits rep_seed into four Philox streams (train data,
hyperparameter restarts, test covariates, dose seeding).
"""

import logging
import multiprocessing
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from dose_finding.errors import ConfigValidationError, DoseFindingError
from dose_finding.gaussian_process import optimize_hyperparameters
from dose_finding.lcsl_policy import SEEDING_STRATEGIES, PenaltySpec, recommend_dose_table
from simulation.scenarios import SCENARIOS, get_scenario, make_rng, optimal_doses, optimal_value, sample_covariates, sample_dataset, true_q_batch

logger = logging.getLogger(__name__)

STREAM_TRAIN, STREAM_RESTARTS, STREAM_TEST, STREAM_SEEDING = 0, 1, 2, 3

POLICIES = ('lcsl', 'oracle')

SWEEP_PERCENTILES = tuple(range(50, 100))


@dataclass
class ExperimentConfig:
    """One scenario, several train sizes and percentiles."""
    scenario_id: int
    n_train_list: List[int] = field(default_factory=lambda: [50, 100, 200, 400])
    replications: int = 20
    n_test: int = 1000
    percentiles: List[int] = field(default_factory=lambda: [95])
    restarts: int = 10
    grid_size: int = 50
    base_seed: int = 2018
    workers: int = 1
    refine: bool = False
    seeding: str = 'grid'
    policy: str = 'lcsl'

    def problems(self) -> List[str]:
        """Every validation problem, not just the first."""
        problems = []
        if self.scenario_id not in SCENARIOS:
            problems.append(f"scenario must be one of {sorted(SCENARIOS)}, got {self.scenario_id}")
        if not self.n_train_list:
            problems.append("n_train list must not be empty")
        problems.extend(f"n_train must be positive, got {n}" for n in self.n_train_list if n < 1)
        duplicates = sorted({n for n in self.n_train_list if self.n_train_list.count(n) > 1})
        if duplicates:
            problems.append(f"n_train list must not repeat a train size, got duplicates {duplicates}")
        for name in ('replications', 'n_test', 'restarts', 'workers'):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be positive, got {getattr(self, name)}")
        if self.grid_size < 2:
            problems.append(f"grid_size must be >= 2, got {self.grid_size}")
        if not self.percentiles:
            problems.append("percentile list must not be empty")
        problems.extend(
            f"percentile must be an integer in [50, 99], got {q}"
            for q in self.percentiles if int(q) != q or not 50 <= q <= 99
        )
        if self.seeding not in SEEDING_STRATEGIES:
            problems.append(f"seeding must be one of {SEEDING_STRATEGIES}, got {self.seeding!r}")
        if self.policy not in POLICIES:
            problems.append(f"policy must be one of {POLICIES}, got {self.policy!r}")
        return problems

    def validate(self):
        problems = self.problems()
        if problems:
            raise ConfigValidationError(problems)


@dataclass
class ReplicationResult:
    """vhat per percentile for one replication (values empty if it failed)."""
    n_train: int
    replication: int
    values: Dict[int, float]
    optimal_value: float
    wall_time: float
    error: Optional[str] = None


@dataclass
class ExperimentRow:
    scenario_id: int
    n_train: int
    percentile: int
    mean_vhat: Optional[float]
    std_vhat: Optional[float]
    completed: int
    failed: int
    wall_time: float

    @property
    def single_replication(self) -> bool:
        return self.completed == 1


@dataclass
class ExperimentSummary:
    """Rows sorted by (n_train, percentile)."""
    rows: List[ExperimentRow]
    replications: int

    def row(self, n_train: int, percentile: int) -> ExperimentRow:
        for row in self.rows:
            if row.n_train == n_train and row.percentile == percentile:
                return row
        raise KeyError((n_train, percentile))


def replication_seed(base_seed: int, scenario_id: int, n_train: int, replication: int) -> int:
    """Seed of one replication; independent of the percentile (paired design)."""
    state = np.random.SeedSequence([int(base_seed), int(scenario_id), int(n_train), int(replication)]).generate_state(1)
    return int(state[0])


def mean_and_std(values: Sequence[float]) -> Tuple[Optional[float], Optional[float]]:
    """Mean and (n - 1) sample std; std is 0 for a single value, both None for none."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return None, None
    if values.size == 1:
        return float(values[0]), 0.0
    return float(np.mean(values)), float(np.std(values, ddof=1))


def evaluate_replication(
    scenario_id: int,
    n_train: int,
    n_test: int,
    percentiles: Sequence[int],
    restarts: int,
    grid_size: int,
    rep_seed: int,
    refine: bool = False,
    seeding: str = 'grid',
    policy: str = 'lcsl',
) -> Tuple[Dict[int, float], float]:
    """
    One replication scored for several percentiles on the same fit and test draw.

    Returns:
        ({percentile: vhat}, optimal value on the same test draw)
    """
    spec = get_scenario(scenario_id)
    C_test = sample_covariates(spec, n_test, make_rng(rep_seed, STREAM_TEST))
    best_value = optimal_value(spec, C_test)

    if policy == 'oracle':
        vhat = float(np.mean(true_q_batch(spec, C_test, optimal_doses(spec, C_test))))
        return {int(q): vhat for q in percentiles}, best_value

    data = sample_dataset(spec, n_train, make_rng(rep_seed, STREAM_TRAIN))
    model = optimize_hyperparameters(data, restarts, make_rng(rep_seed, STREAM_RESTARTS))

    penalties = [PenaltySpec(int(q)) for q in dict.fromkeys(int(q) for q in percentiles)]
    table = recommend_dose_table(
        model, C_test, penalties, grid_size, refine, seeding, make_rng(rep_seed, STREAM_SEEDING)
    )

    values = {}
    for q, recommendations in table.items():
        doses = np.array([rec.dose for rec in recommendations])
        values[q] = float(np.mean(true_q_batch(spec, C_test, doses)))
        if values[q] > best_value + 1e-9:
            raise AssertionError(
                f"vhat {values[q]} exceeds the attainable value {best_value} (seed {rep_seed})"
            )
    return values, best_value


def run_replication(
    scenario_id: int,
    n_train: int,
    n_test: int,
    penalty: PenaltySpec,
    restarts: int,
    grid_size: int,
    rep_seed: int,
    refine: bool = False,
    seeding: str = 'grid',
    policy: str = 'lcsl',
) -> float:
    """
    Estimated value of the dose rule for one replication.

    Deterministic given rep_seed. Fitting errors propagate.
    """
    values, _ = evaluate_replication(
        scenario_id, n_train, n_test, [penalty.percentile], restarts, grid_size, rep_seed,
        refine, seeding, policy,
    )
    return values[penalty.percentile]


def _run_job(job: Tuple[ExperimentConfig, int, int]) -> ReplicationResult:
    config, n_train, replication = job
    rep_seed = replication_seed(config.base_seed, config.scenario_id, n_train, replication)
    start = time.perf_counter()
    try:
        values, best_value = evaluate_replication(
            config.scenario_id, n_train, config.n_test, config.percentiles, config.restarts,
            config.grid_size, rep_seed, config.refine, config.seeding, config.policy,
        )
        error = None
    except DoseFindingError as e:
        values, best_value, error = {}, float('nan'), f"{type(e).__name__}: {e}"
    return ReplicationResult(n_train, replication, values, best_value, time.perf_counter() - start, error)


def _collect(config: ExperimentConfig) -> List[ReplicationResult]:
    jobs = [(config, n_train, rep) for n_train in config.n_train_list for rep in range(config.replications)]
    total = len(jobs)
    results = []

    def report(result: ReplicationResult):
        results.append(result)
        if result.error:
            logger.warning(
                f"scenario {config.scenario_id} n_train={result.n_train} rep {result.replication} failed: {result.error}"
            )
        else:
            logger.info(
                f"[{len(results)}/{total}] scenario {config.scenario_id} n_train={result.n_train} "
                f"rep {result.replication} done in {result.wall_time:.1f}s"
            )

    if config.workers > 1 and total > 1:
        with multiprocessing.Pool(processes=min(config.workers, total)) as pool:
            for result in pool.imap_unordered(_run_job, jobs):
                report(result)
    else:
        for job in jobs:
            report(_run_job(job))
    return results


def summarize(config: ExperimentConfig, results: Sequence[ReplicationResult]) -> ExperimentSummary:
    """Aggregate replication results into one row per (n_train, percentile)."""
    rows = []
    for n_train in sorted(set(config.n_train_list)):
        cell = sorted((r for r in results if r.n_train == n_train), key=lambda r: r.replication)
        done = [r for r in cell if r.error is None]
        wall_time = float(sum(r.wall_time for r in cell))
        for q in sorted(set(int(q) for q in config.percentiles)):
            mean, std = mean_and_std([r.values[q] for r in done])
            row = ExperimentRow(
                scenario_id=config.scenario_id,
                n_train=n_train,
                percentile=q,
                mean_vhat=mean,
                std_vhat=std,
                completed=len(done),
                failed=len(cell) - len(done),
                wall_time=wall_time,
            )
            if mean is None:
                logger.warning(f"n_train={n_train} percentile={q}: no completed replications, reported as missing")
            elif row.single_replication:
                logger.warning(f"n_train={n_train} percentile={q}: single replication, std reported as 0")
            rows.append(row)
    return ExperimentSummary(rows=rows, replications=config.replications)


def run_experiment(config: ExperimentConfig) -> ExperimentSummary:
    """
    Run every (n_train, replication) job and aggregate by (n_train, percentile).

    Failed replications are excluded and counted, never retried.
    """
    config.validate()
    logger.info(
        f"scenario {config.scenario_id}: n_train={config.n_train_list}, {config.replications} replications, "
        f"percentiles={config.percentiles}, {config.workers} worker(s)"
    )
    return summarize(config, _collect(config))


def penalty_sweep(config: ExperimentConfig, percentiles: Optional[Sequence[int]] = None) -> ExperimentSummary:
    """
    run_experiment over a percentile grid (default 50..99 in steps of 1).

    Percentiles share replication seeds, so every percentile in a cell sees
    the same training and test data.
    """
    if percentiles is None:
        percentiles = SWEEP_PERCENTILES
    return run_experiment(replace(config, percentiles=[int(q) for q in percentiles]))
