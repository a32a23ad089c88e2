#!/usr/bin/env python3
"""Run the static cross-section study and write the report CSVs.

Usage: python scripts/run_static.py [OUT_DIR] [N_PATHS]
"""

import sys

from mgpert.experiments import run_static_experiment, write_static_report
from mgpert.mc import McConfig


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "out/static"
    n_paths = int(sys.argv[2]) if len(sys.argv) > 2 else 500_000
    report = run_static_experiment(mc_cfg=McConfig(n_paths=n_paths, steps_per_day=10))
    write_static_report(report, out_dir)
    print("v_init sigma_hat ivrmse")
    for row in report.rows:
        print(f"{row.v_init:.4f} {row.sigma_hat:.4f} {row.ivrmse:.4f}")


if __name__ == "__main__":
    main()
