#!/usr/bin/env python3
"""Mean sum-rate versus element count per architecture."""

import argparse
from pathlib import Path

import numpy as np

from bdris import emit_outputs, load_experiment_spec, run_experiment


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--spec", default=Path(__file__).parents[1]
                        / "configs" / "bench_elements.yaml")
    parser.add_argument("--out", default=None)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    spec = load_experiment_spec(args.spec)
    out = args.out or spec.output_dir or "results/elements"
    table = run_experiment(spec, workers=args.workers)
    emit_outputs(table, [], out, spec=spec)
    for tag in spec.architectures:
        line = [f"{tag:4s}"]
        for value in spec.sweep_values:
            rates = [r.sum_rate_bits for r in table.rows
                     if r.architecture == tag and r.sweep_value == value]
            line.append(f"R={value}: {np.mean(rates):7.3f}" if rates
                        else f"R={value}: skipped")
        print("  ".join(line))
    for skip in table.skipped:
        print(f"skipped {skip['architecture']} at {skip['sweep_value']}: "
              f"{skip['reason']}")
    print(f"outputs in {out}")


if __name__ == "__main__":
    main()
