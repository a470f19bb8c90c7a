"""Posterior under EL, synthetic likelihood and rejection ABC for one example.

Writes out/<example>-<method>/{chain,summary,manifest,timing,density} files,
the data behind the marginal-density comparison plots.

    python scripts/compare_methods.py gk --iterations 20000 --seed 7
"""

import argparse
import json

from elabc.experiments import RunConfig, run_density, run_inference
from elabc.models import MODEL_NAMES

METHODS = ("el", "synthetic", "rejection-abc")

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("example", choices=MODEL_NAMES)
    parser.add_argument("--iterations", type=int, default=10_000)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--abc-total", type=int, default=200_000)
    parser.add_argument("--abc-keep", type=int, default=2_000)
    parser.add_argument("--out", default="out")
    args = parser.parse_args()

    for method in METHODS:
        cfg = RunConfig(
            example=args.example,
            method=method,
            iterations=args.iterations,
            burnin=args.iterations,
            seed=args.seed,
            output_dir=f"{args.out}/{args.example}-{method}",
            abc_n_total=args.abc_total,
            abc_keep=args.abc_keep,
        )
        summary = run_inference(cfg)
        run_density(f"{cfg.output_dir}/chain.csv", 512)
        means = {k: round(v["mean"], 4) for k, v in summary["posterior"].items()}
        print(method, json.dumps(means))
