#!/usr/bin/env python3
"""Sum-rate CDF comparison across architectures on shared channels.

Thin wrapper around the bench harness with the stock CDF spec; pass a
different spec file to change dimensions, trial count, or geometry.
"""

import argparse
from pathlib import Path

import numpy as np

from bdris import emit_outputs, load_experiment_spec, run_experiment


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--spec", default=Path(__file__).parents[1]
                        / "configs" / "bench_cdf.yaml")
    parser.add_argument("--out", default=None)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    spec = load_experiment_spec(args.spec)
    out = args.out or spec.output_dir or "results/cdf"
    table = run_experiment(spec, workers=args.workers)
    emit_outputs(table, [], out, spec=spec)
    for tag in spec.architectures:
        rates = [r.sum_rate_bits for r in table.rows if r.architecture == tag]
        print(f"{tag:4s} mean {np.mean(rates):7.3f}  "
              f"median {np.median(rates):7.3f}  n={len(rates)}")
    print(f"outputs in {out}")


if __name__ == "__main__":
    main()
