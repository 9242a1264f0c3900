#!/usr/bin/env python3
"""
LCSL Command Line
=================

Commands:
  fit         Fit a GP dose-response model to a DataCSV file
  recommend   Recommend a dose for one covariate vector
  explain     Rank training points by their share of the prediction
  experiment  Run the replicated simulation protocol, write a results CSV
  sweep       Penalty sweep over percentiles (plot-ready long CSV)
  export      Write a simulated scenario dataset as DataCSV

Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 I/O error.

Usage:
  python -m dose_finding.cli fit --data train.csv --dose-range 0,1 --out model.yaml
  python -m dose_finding.cli recommend --model model.yaml --covariates 0.5
  python -m dose_finding.cli experiment --scenario 3 --n-train 100,400 --out s3.csv
"""

import argparse
import logging
import math
import sys
from typing import List, Optional, Tuple

import numpy as np

from dose_finding.config import FULL_PROFILE, load_config, resolve_workers
from dose_finding.errors import (
    ConditioningError,
    ConfigValidationError,
    DataFormatError,
    DomainError,
    FittingError,
    InputShapeError,
)
from dose_finding.gaussian_process import optimize_hyperparameters, predict
from dose_finding.lcsl_policy import (
    SEEDING_STRATEGIES,
    PenaltySpec,
    explain,
    explain_variance,
    recommend_dose,
    relevance_table,
)
from dose_finding.model_io import (
    EXPERIMENT_COLUMNS,
    SWEEP_COLUMNS,
    companion_table_path,
    format_summary_table,
    load_model,
    read_data_csv,
    save_model,
    write_data_csv,
    write_summary_csv,
    write_summary_table,
)
from simulation.harness import SWEEP_PERCENTILES, ExperimentConfig, penalty_sweep, run_experiment
from simulation.scenarios import get_scenario, make_rng, sample_dataset

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def parse_float_list(text: str, name: str) -> List[float]:
    try:
        return [float(v) for v in text.split(',') if v.strip() != '']
    except ValueError:
        raise ConfigValidationError([f"{name} must be comma-separated numbers, got {text!r}"])


def parse_int_list(text: str, name: str) -> List[int]:
    try:
        return [int(v) for v in text.split(',') if v.strip() != '']
    except ValueError:
        raise ConfigValidationError([f"{name} must be comma-separated integers, got {text!r}"])


def parse_percentiles(text: str) -> List[int]:
    """'95', '50,75,95' or an inclusive range 'lo:hi:step' such as '50:99:1'."""
    if ':' in text:
        parts = text.split(':')
        try:
            lo, hi = int(parts[0]), int(parts[1])
            step = int(parts[2]) if len(parts) > 2 else 1
        except (ValueError, IndexError):
            raise ConfigValidationError([f"percentile range must look like lo:hi:step, got {text!r}"])
        if step < 1 or len(parts) > 3:
            raise ConfigValidationError([f"percentile range must look like lo:hi:step with step >= 1, got {text!r}"])
        return list(range(lo, hi + 1, step))
    return parse_int_list(text, 'percentiles')


def parse_dose_range(text: str) -> Tuple[float, float]:
    values = parse_float_list(text, 'dose range')
    if len(values) != 2 or not values[0] < values[1]:
        raise ConfigValidationError([f"dose range must be 'lo,hi' with lo < hi, got {text!r}"])
    return values[0], values[1]


def print_banner(title: str):
    print("=" * 60)
    print(title)
    print("=" * 60)


def cmd_fit(args, config) -> int:
    gp_cfg = config['gp']
    data = read_data_csv(args.data, parse_dose_range(args.dose_range))
    restarts = args.restarts if args.restarts is not None else gp_cfg['restarts']

    model = optimize_hyperparameters(
        data,
        restarts,
        make_rng(args.seed),
        bounds=tuple(gp_cfg['bounds']),
        init_range=tuple(gp_cfg['init_range']),
        max_iter=gp_cfg['max_iter'],
        gtol=gp_cfg['gtol'],
        jitter_ladder=gp_cfg['jitter_ladder'],
    )
    save_model(model, args.out)

    print_banner("GP FIT")
    print(f"Records:                {data.n} ({data.p} covariate(s) + dose)")
    print(f"Restarts:               {restarts} (seed {args.seed})")
    print(f"Log marginal likelihood: {model.log_ml:.6f}")
    print(f"sigma_f2:               {model.hp.sigma_f2:.6g}")
    print(f"sigma_n2:               {model.hp.sigma_n2:.6g}")
    for name, theta in zip([f"C{i + 1}" for i in range(data.p)] + ['dose'], model.hp.theta):
        print(f"theta[{name}]:{' ' * max(1, 14 - len(name))}{theta:.6g}")
    print(f"Model written to:       {args.out}")
    return EXIT_OK


def cmd_recommend(args, config) -> int:
    policy_cfg = config['policy']
    model = load_model(args.model)
    c_star = np.array(parse_float_list(args.covariates, 'covariates'))
    penalty = PenaltySpec(args.percentile if args.percentile is not None else policy_cfg['percentile'])
    grid = args.grid if args.grid is not None else policy_cfg['grid_size']
    refine = args.refine or bool(policy_cfg['refine'])
    seeding = args.seeding or policy_cfg['seeding']

    rec = recommend_dose(model, c_star, penalty, grid, refine, seeding, make_rng(args.seed))

    print_banner("DOSE RECOMMENDATION")
    print(f"Covariates:      {', '.join(f'{c:g}' for c in c_star)}")
    print(f"Percentile:      {penalty.percentile} (s = {penalty.s:.7f})")
    print(f"Dose:            {rec.dose:.10g}")
    print(f"Objective:       {rec.objective:.10g}")
    print(f"Mean (scaled):   {rec.mean:.10g}")
    print(f"Mean (reward):   {float(model.scaler.inverse(rec.mean)):.10g}")
    print(f"SD (scaled):     {rec.sd:.10g}")
    if refine:
        print(f"Best seed dose:  {rec.grid_argmax:.10g}")
    return EXIT_OK


def cmd_explain(args, config) -> int:
    model = load_model(args.model)
    c_star = np.array(parse_float_list(args.covariates, 'covariates'))
    top = min(args.top, model.n)

    contributions = explain(model, c_star, args.dose, top)
    posterior = predict(model, np.append(c_star, args.dose))
    total = math.fsum(value for _, value in explain(model, c_star, args.dose, model.n))

    print_banner("MEAN CONTRIBUTIONS")
    print(f"{'Rank':<6} {'Index':<8} {'Contribution':>16}")
    print("-" * 32)
    for rank, (index, value) in enumerate(contributions, 1):
        print(f"{rank:<6} {index:<8} {value:>16.10g}")
    print("-" * 32)
    print(f"Sum of all {model.n} contributions: {total:.12g}")
    print(f"Posterior mean (scaled):  {posterior.mean:.12g}")
    print(f"Posterior mean (reward):  {float(model.scaler.inverse(posterior.mean)):.12g}")
    print(f"Posterior sd (scaled):    {posterior.sd:.12g}")

    if args.variance:
        print()
        print_banner("VARIANCE REDUCTION TERMS")
        for rank, (index, value) in enumerate(explain_variance(model, c_star, args.dose, top), 1):
            print(f"{rank:<6} {index:<8} {value:>16.10g}")

    print()
    print_banner("FEATURE RELEVANCES (1 / theta)")
    for name, value in relevance_table(model):
        print(f"{name:<10} {value:>16.8g}")
    return EXIT_OK


def _experiment_config(args, config, default_percentiles: List[int]):
    """ExperimentConfig from flags over config.yaml; every problem is reported at once."""
    exp_cfg = dict(config['experiment'])
    if args.full_profile or exp_cfg.get('full_profile'):
        exp_cfg.update(FULL_PROFILE)
    policy_cfg = config['policy']

    problems = []
    percentiles = list(default_percentiles)
    if args.percentiles:
        try:
            percentiles = parse_percentiles(args.percentiles)
        except ConfigValidationError as e:
            problems.extend(e.problems)

    n_train_list = exp_cfg['n_train_list']
    if args.n_train:
        try:
            n_train_list = parse_int_list(args.n_train, 'n-train')
        except ConfigValidationError as e:
            problems.extend(e.problems)

    experiment = ExperimentConfig(
        scenario_id=args.scenario,
        n_train_list=n_train_list,
        replications=args.replications if args.replications is not None else exp_cfg['replications'],
        n_test=args.n_test if args.n_test is not None else exp_cfg['n_test'],
        percentiles=percentiles,
        restarts=args.restarts if args.restarts is not None else config['gp']['restarts'],
        grid_size=args.grid if args.grid is not None else policy_cfg['grid_size'],
        base_seed=args.seed if args.seed is not None else exp_cfg['base_seed'],
        workers=args.workers if args.workers is not None else resolve_workers(exp_cfg.get('workers')),
        refine=args.refine or bool(policy_cfg['refine']),
        seeding=args.seeding or policy_cfg['seeding'],
        policy=args.policy,
    )
    problems.extend(experiment.problems())
    if problems:
        raise ConfigValidationError(problems)
    return experiment


def cmd_experiment(args, config) -> int:
    experiment = _experiment_config(args, config, [config['policy']['percentile']])
    summary = run_experiment(experiment)

    write_summary_csv(summary, args.out, EXPERIMENT_COLUMNS)
    table_path = companion_table_path(args.out)
    write_summary_table(summary, table_path)

    print_banner(f"SCENARIO {experiment.scenario_id}: MEAN AND (STD) OF VHAT")
    print(format_summary_table(summary), end='')
    print(f"\nResults CSV:  {args.out}")
    print(f"Table:        {table_path}")
    return EXIT_OK


def cmd_sweep(args, config) -> int:
    experiment = _experiment_config(args, config, list(SWEEP_PERCENTILES))
    summary = penalty_sweep(experiment, experiment.percentiles)
    write_summary_csv(summary, args.out, SWEEP_COLUMNS)
    print(f"Wrote {len(summary.rows)} sweep rows to {args.out}")
    return EXIT_OK


def cmd_export(args, config) -> int:
    spec = get_scenario(args.scenario)
    data = sample_dataset(spec, args.n, make_rng(args.seed))
    write_data_csv(data, args.out)
    lo, hi = spec.dose_range
    print(f"Wrote {data.n} records of scenario {spec.id} to {args.out} (dose range {lo:g},{hi:g})")
    return EXIT_OK


def _add_experiment_arguments(parser: argparse.ArgumentParser):
    parser.add_argument('--scenario', type=int, required=True, choices=[1, 2, 3, 4, 5])
    parser.add_argument('--n-train', help='Comma-separated train sizes (default: config)')
    parser.add_argument('--replications', type=int, help='Replications per train size')
    parser.add_argument('--n-test', type=int, help='Test subjects per replication (default 1000)')
    parser.add_argument('--restarts', type=int, help='Marginal likelihood restarts (default 10)')
    parser.add_argument('--grid', type=int, help='Dose grid size (default 50)')
    parser.add_argument('--seed', type=int, help='Base seed')
    parser.add_argument('--workers', type=int, help='Parallel replications (default: $LCSL_WORKERS or CPU count)')
    parser.add_argument('--refine', action='store_true', help='Local L-BFGS-B refinement after seeding')
    parser.add_argument('--seeding', choices=SEEDING_STRATEGIES)
    parser.add_argument('--policy', choices=['lcsl', 'oracle'], default='lcsl')
    parser.add_argument('--full-profile', action='store_true', help='50 replications, n_train up to 800')
    parser.add_argument('--out', required=True, help='Output CSV path')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Individualized dose finding with lower confidence surfaces")
    parser.add_argument('--config', help='Path to config.yaml (default: repository config or $LCSL_CONFIG)')
    parser.add_argument('--log-level', help='Logging level override (DEBUG, INFO, WARNING)')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('fit', help='Fit a GP model to a DataCSV file')
    p.add_argument('--data', required=True)
    p.add_argument('--dose-range', required=True, help="'lo,hi'")
    p.add_argument('--restarts', type=int)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', required=True)
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser('recommend', help='Recommend a dose')
    p.add_argument('--model', required=True)
    p.add_argument('--covariates', required=True, help="'c1,...,cp'")
    p.add_argument('--percentile', type=int)
    p.add_argument('--grid', type=int)
    p.add_argument('--refine', action='store_true')
    p.add_argument('--seeding', choices=SEEDING_STRATEGIES)
    p.add_argument('--seed', type=int, default=0, help='Seed for random seeding strategies')
    p.set_defaults(handler=cmd_recommend)

    p = sub.add_parser('explain', help='Rank training points and feature relevances')
    p.add_argument('--model', required=True)
    p.add_argument('--covariates', required=True)
    p.add_argument('--dose', type=float, required=True)
    p.add_argument('--top', type=int, default=10)
    p.add_argument('--variance', action='store_true', help='Also rank variance-reduction terms')
    p.set_defaults(handler=cmd_explain)

    p = sub.add_parser('experiment', help='Replicated simulation protocol')
    _add_experiment_arguments(p)
    p.add_argument('--percentiles', help="e.g. '95' or '50,95' (default: config)")
    p.set_defaults(handler=cmd_experiment)

    p = sub.add_parser('sweep', help='Penalty sweep over percentiles')
    _add_experiment_arguments(p)
    p.add_argument('--percentiles', help="Range 'lo:hi:step' (default 50:99:1)")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser('export', help='Write a simulated scenario dataset as CSV')
    p.add_argument('--scenario', type=int, required=True, choices=[1, 2, 3, 4, 5])
    p.add_argument('--n', type=int, default=200)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', required=True)
    p.set_defaults(handler=cmd_export)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
    except ConfigValidationError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO

    log_cfg = config['logging']
    logging.basicConfig(
        level=(args.log_level or log_cfg['level']).upper(),
        format=log_cfg['format'],
        stream=sys.stderr,
    )

    try:
        return args.handler(args, config)
    except (ConfigValidationError, DataFormatError, DomainError, InputShapeError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConditioningError, FittingError) as e:
        print(f"Numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
