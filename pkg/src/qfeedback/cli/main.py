"""``qfeedback`` command line.

Exit codes: 0 success, 1 invalid configuration, 2 numerical failure
(including failed sweep points), 3 I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from ..exceptions import ConfigError
from .config import EXPERIMENTS, METRICS, OBSERVABLES, parse_config
from .runner import NUMERICAL_ERRORS, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qfeedback", description="Run measurement-feedback experiments from TOML configs.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config and write CSV + manifest")
    run.add_argument("config", help="path to a TOML experiment file")
    run.add_argument("--output-dir", help="directory for output files (overrides [output].dir)")
    run.add_argument("--seed", type=int, help="random seed (overrides the config)")
    run.add_argument("--threads", type=int, default=1, help="worker threads for sweeps and trajectory chunks")
    run.add_argument("--format", choices=("csv",), default="csv", help="output format")

    val = sub.add_parser("validate", help="parse and validate a config without running it")
    val.add_argument("config")

    sub.add_parser("list-experiments", help="list experiments, run kinds and parameter defaults")
    return parser


def _load(path: str):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _list_experiments(out) -> None:
    for name, info in EXPERIMENTS.items():
        print(f"{name}: {info['description']}", file=out)
        print(f"  runs: {', '.join(info['runs'])}", file=out)
        params = ", ".join(f"{k}={v}" for k, v in info["params"].items())
        print(f"  params: {params}", file=out)
        print(f"  observables: {', '.join(OBSERVABLES[name])}", file=out)
        print(f"  metrics: {', '.join(METRICS[name])}", file=out)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-experiments":
        _list_experiments(sys.stdout)
        return EXIT_OK

    try:
        cfg = _load(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO

    if args.command == "validate":
        print(f"ok: {cfg.experiment} / {cfg.run}, {len(cfg.grid())} grid point(s)")
        return EXIT_OK

    if args.threads < 1:
        print("config error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    overrides = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            print("config error: --seed must lie in [0, 2**64)", file=sys.stderr)
            return EXIT_CONFIG
        overrides["seed"] = args.seed
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    cfg = dataclasses.replace(cfg, **overrides)

    try:
        result = run_experiment(cfg, threads=args.threads)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    print(f"wrote {result.csv_path} ({result.n_rows} rows) and {result.manifest_path}")
    if result.n_failed:
        print(f"{result.n_failed} of {result.n_rows} grid points failed", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
