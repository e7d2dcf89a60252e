"""Command line entry point.

    doclab run     --config exp.toml [--seed S] [--workers W] [--out-dir DIR] [--stage STAGE]
    doclab doc|qn|volumes|bounds|report --config exp.toml ...

``run`` executes the full pipeline (from ``--stage`` onward when given); the
single-stage verbs run one stage against existing artifacts. Exit status is
0 on success, 1 on an invalid config, 2 when a stage fails.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, validate_config
from .pipeline import STAGES, StageError, artifact_dir, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="doclab", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="verb", required=True)
    for verb in ("run", *STAGES):
        sp = sub.add_parser(verb)
        sp.add_argument("--config", required=True, help="TOML experiment file")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--workers", type=int, help="override the worker count")
        sp.add_argument("--out-dir", default="runs", help="artifact root (default: runs)")
        if verb == "run":
            sp.add_argument("--stage", choices=STAGES, help="start the pipeline at this stage")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = validate_config(args.config, check_files=args.verb not in ("bounds", "report"))
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError(["--seed must be >= 0"])
            config.seed = args.seed
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError(["--workers must be >= 1"])
            config.workers = args.workers
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG

    if args.verb == "run":
        stages = STAGES[STAGES.index(args.stage):] if args.stage else STAGES
    else:
        stages = (args.verb,)
    try:
        d = run_experiment(config, args.out_dir, stages)
    except StageError as exc:
        print(f"error: {exc} (artifacts in {artifact_dir(config, args.out_dir)})", file=sys.stderr)
        return EXIT_STAGE
    if "report" in stages:
        report = json.loads((d / "report.json").read_text())
        for row in report["per_n"]:
            mean = "-" if row["mean"] is None else f"{row['mean']:.4f}"
            pred = "-" if row["predicted_mean_error"] is None else f"{row['predicted_mean_error']:.4f}"
            print(f"n={row['n']:>4}  solutions={row['count']:>5}  mean test error={mean}  predicted={pred}")
    print(f"artifacts: {d}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
