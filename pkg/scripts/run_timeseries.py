#!/usr/bin/env python3
"""Run the time-series study for all four data sets at desk scale.

Usage: python scripts/run_timeseries.py [OUT_DIR] [N_WORKERS]
"""

import sys

from mgpert.experiments import run_timeseries_experiment, write_timeseries_report


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "out/timeseries"
    n_workers = int(sys.argv[2]) if len(sys.argv) > 2 else 1
    reports = []
    for dataset in (1, 2, 3, 4):
        rep = run_timeseries_experiment(dataset, n_workers=n_workers)
        reports.append(rep)
        print(f"dataset {dataset}: ivrmse mean={rep.ivrmse_mean:.4f} "
              f"std={rep.ivrmse_std:.4f}")
        for s in rep.param_stats:
            print(f"  {s.param}: mean={s.mean:.4f} std={s.std:.4f}")
    write_timeseries_report(reports, out_dir)


if __name__ == "__main__":
    main()
