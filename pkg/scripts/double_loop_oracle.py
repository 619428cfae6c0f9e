"""Nested Monte Carlo first-order indices of the true benchmark's kPCA score.

Loads the last level of a finished run directory, scores the exact benchmark output
with that level's kPCA model and compares against the surrogate's Saltelli estimates.

    python3 scripts/double_loop_oracle.py --out runs/benchmark --dims 4 6 --outer 10000 --inner 1000
"""

import argparse
import time

from uq_adapt.driver import resume
from uq_adapt.oracle import benchmark_score_fn, double_loop_first_order


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True)
    ap.add_argument("--component", type=int, default=1, help="1-based kPCA component")
    ap.add_argument("--dims", type=int, nargs="+", default=[1, 2, 3, 4, 5, 6], help="1-based inputs")
    ap.add_argument("--outer", type=int, default=10_000)
    ap.add_argument("--inner", type=int, default=1_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    state = resume(args.out)
    c = args.component - 1
    func = benchmark_score_fn(state.fit.model, c)
    t0 = time.perf_counter()
    ref = double_loop_first_order(func, state.config.space, [d - 1 for d in args.dims],
                                  args.outer, args.inner, args.seed)
    print(f"double loop {args.outer} x {args.inner} in {time.perf_counter() - t0:.0f} s")
    first = state.fit.sobol[c].first
    print("input  double-loop  surrogate")
    for d in args.dims:
        print(f"  h{d}   {ref[d - 1]:9.4f}  {first[d - 1]:9.4f}")


if __name__ == "__main__":
    main()
