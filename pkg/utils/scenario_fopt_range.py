#!/usr/bin/env python3
"""
Optimal Dose Range Check
========================

Report the empirical range of the true optimal dose for the single-covariate
scenarios on an even covariate grid, and whether it fits the dose interval.
"""

import sys
import os

# Add parent directory to path
current_dir = os.path.dirname(os.path.abspath(__file__))
parent_dir = os.path.dirname(current_dir)
if parent_dir not in sys.path:
    sys.path.insert(0, parent_dir)

from simulation.scenarios import SCENARIOS, fopt_range


def main():
    points = int(sys.argv[1]) if len(sys.argv) > 1 else 10_000

    print("=" * 60)
    print("OPTIMAL DOSE RANGE")
    print("=" * 60)
    print(f"{'Scenario':<10} {'min f_opt':>12} {'max f_opt':>12} {'Dose range':>14} {'Inside':>8}")
    print("-" * 60)

    for spec in SCENARIOS.values():
        bounds = fopt_range(spec, points)
        if bounds is None:
            continue
        lo, hi = spec.dose_range
        inside = lo <= bounds[0] and bounds[1] <= hi
        print(f"{spec.id:<10} {bounds[0]:>12.4f} {bounds[1]:>12.4f} {f'[{lo:g}, {hi:g}]':>14} {'yes' if inside else 'NO':>8}")

    print("-" * 60)


if __name__ == "__main__":
    main()
