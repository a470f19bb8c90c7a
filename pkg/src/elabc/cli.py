"""Command line entry point: ``elabc {run,coverage,density,concentration}``.

Settings come from a JSON config file; flags of the same name given on the
command line take precedence over the file.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import (
    ConcentrationConfig,
    CoverageConfig,
    EmptyChain,
    RunConfig,
    ValidationError,
    run_concentration,
    run_coverage,
    run_density,
    run_inference,
)
from .samplers import InitializationError

EXIT_VALIDATION = 2
EXIT_FAILURE = 1


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError(f"config {path} must hold a JSON object")
    return data


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--example")
    p.add_argument("--method")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--burnin", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--data", help="observed data CSV, one value per line")


def _merged(args, keys) -> dict:
    cfg = _load_config(args.config)
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


RUN_KEYS = ("example", "method", "n", "m", "iterations", "burnin", "seed", "output_dir", "data")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elabc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="sample one posterior and write chain.csv + summary.json")
    _add_run_flags(p)

    p = sub.add_parser("coverage", help="credible-interval coverage study for the normal example")
    _add_run_flags(p)
    p.add_argument("--replicates", type=int)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("density", help="marginal kernel density table from a chain CSV")
    p.add_argument("--config")
    p.add_argument("--chain")
    p.add_argument("--grid", type=int)
    p.add_argument("--output")

    p = sub.add_parser("concentration", help="posterior sd across increasing sample sizes")
    _add_run_flags(p)
    p.add_argument("--workers", type=int)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = RunConfig.from_dict(_merged(args, RUN_KEYS))
            summary = run_inference(cfg)
            print(json.dumps(summary["posterior"], indent=2, sort_keys=True))
        elif args.command == "coverage":
            cfg = CoverageConfig.from_dict(_merged(args, RUN_KEYS + ("replicates", "workers")))
            report = run_coverage(cfg)
            for row in report.rows:
                print(f"{row.label}: coverage {row.coverage:.2f}, average length {row.average_length:.3f}")
            print(f"truth: coverage 0.95, average length {report.truth['average_length']:.3f}")
        elif args.command == "density":
            cfg = _merged(args, ("chain", "grid", "output"))
            unknown = sorted(set(cfg) - {"chain", "grid", "output"})
            if unknown:
                raise ValidationError(f"unknown density configuration keys {unknown}")
            if not cfg.get("chain"):
                raise ValidationError("density needs --chain <file.csv>")
            grid = cfg.get("grid", 512)
            if not isinstance(grid, int) or grid < 2:
                raise ValidationError(f"grid must be an integer >= 2, got {grid!r}")
            try:
                path = run_density(cfg["chain"], grid, cfg.get("output"))
            except OSError as exc:
                raise ValidationError(f"cannot read chain {cfg['chain']}: {exc}") from None
            print(path)
        elif args.command == "concentration":
            cfg = ConcentrationConfig.from_dict(_merged(args, RUN_KEYS + ("workers",)))
            result = run_concentration(cfg)
            for row in result["rows"]:
                print(f"n={row['n']}: mean {row['posterior_mean']:+.4f}, sd {row['posterior_sd']:.4f}")
            print("passed" if result["passed"] else "FAILED")
    except (ValidationError, EmptyChain) as exc:
        print(f"elabc: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InitializationError as exc:
        print(f"elabc: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return 0


if __name__ == "__main__":
    sys.exit(main())
