#!/usr/bin/env python3
"""Run the three Gaussian experiments and print measured vs predicted mean test error.

    python3 scripts/reproduce_gaussian.py [--out-dir runs] [--workers 4] [--only shallow]
"""
import argparse
import json
from pathlib import Path

from doclab.config import validate_config
from doclab.pipeline import run_experiment

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
EXPERIMENTS = {"shallow": "gaussian_shallow.toml", "wide": "gaussian_wide.toml", "deep": "gaussian_deep.toml"}


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--out-dir", default="runs")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--only", choices=sorted(EXPERIMENTS), action="append")
    args = p.parse_args()

    for key in args.only or EXPERIMENTS:
        config = validate_config(CONFIGS / EXPERIMENTS[key])
        d = run_experiment(config, args.out_dir, workers=args.workers)
        report = json.loads((d / "report.json").read_text())
        print(f"\n{config.name} ({config.arch}), DOC of {report['doc']['total_samples']} samples")
        print(f"{'n':>4} {'solutions':>9} {'measured':>9} {'sigma':>7} {'predicted':>9} {'median':>7}  bound ok")
        for row in report["per_n"]:
            if not row["count"]:
                print(f"{row['n']:>4} {0:>9}  (every trial ran out of draws)")
                continue
            print(f"{row['n']:>4} {row['count']:>9} {row['mean']:>9.4f} {row['mean_sigma']:>7.4f} "
                  f"{row['predicted_mean_error']:>9.4f} {row['median']:>7.4f}  {row['mean_error_bound_satisfied']}")
        print(f"artifacts: {d}")


if __name__ == "__main__":
    main()
