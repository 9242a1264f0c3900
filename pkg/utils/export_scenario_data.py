#!/usr/bin/env python3
"""
Scenario Data Exporter
======================

Write simulated training sets for every scenario as DataCSV files, e.g. to
feed `python -m dose_finding.cli fit` or an external tool.

Usage:
    python3 utils/export_scenario_data.py [n] [seed] [out_dir]
"""

import sys
import os

# Add parent directory to path
current_dir = os.path.dirname(os.path.abspath(__file__))
parent_dir = os.path.dirname(current_dir)
if parent_dir not in sys.path:
    sys.path.insert(0, parent_dir)

from dose_finding.model_io import write_data_csv
from simulation.scenarios import SCENARIOS, make_rng, sample_dataset


def export_all(n: int, seed: int, out_dir: str):
    """One CSV per scenario; scenario i uses stream (seed, i)."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for scenario_id, spec in SCENARIOS.items():
        data = sample_dataset(spec, n, make_rng(seed, scenario_id))
        path = os.path.join(out_dir, f"scenario{scenario_id}_n{n}_seed{seed}.csv")
        write_data_csv(data, path)
        paths.append((spec, path))
    return paths


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 200
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
    out_dir = sys.argv[3] if len(sys.argv) > 3 else "scenario_data"

    print("=" * 60)
    print("SCENARIO DATA EXPORT")
    print("=" * 60)

    for spec, path in export_all(n, seed, out_dir):
        lo, hi = spec.dose_range
        print(f"  Scenario {spec.id}: p={spec.p:<3} doses [{lo:g}, {hi:g}]  -> {path}")

    print(f"\nFit one with:")
    print(f"  python -m dose_finding.cli fit --data {out_dir}/scenario1_n{n}_seed{seed}.csv --dose-range 0,1 --out model.yaml")


if __name__ == "__main__":
    main()
