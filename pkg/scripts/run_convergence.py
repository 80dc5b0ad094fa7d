#!/usr/bin/env python3
"""Per-iteration convergence traces for the four standard architectures.

Writes trace_<arch>_<seed>.csv files (iter, eta, eta_breve, alpha, grad_norm,
beta) plus results.csv into the output directory. Plot eta against iter to
compare how much work each architecture needs.
"""

import argparse
from pathlib import Path

from bdris import emit_outputs, load_config, run_convergence_traces


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=Path(__file__).parents[1]
                        / "configs" / "desk.yaml")
    parser.add_argument("--seeds", type=int, default=5,
                        help="number of seeds (0..n-1)")
    parser.add_argument("--out", default="results/convergence")
    args = parser.parse_args()

    config, geometry = load_config(args.config)
    table, traces = run_convergence_traces(
        config, geometry, ["sc", "gc2", "gc4", "fc"],
        seeds=list(range(args.seeds)))
    written = emit_outputs(table, traces, args.out)
    print(f"wrote {len(written)} files to {args.out}")
    for row in table.rows:
        print(f"  {row.architecture:4s} seed {row.seed}: "
              f"{row.sum_rate_bits:.3f} bits in {row.iters} iterations")


if __name__ == "__main__":
    main()
