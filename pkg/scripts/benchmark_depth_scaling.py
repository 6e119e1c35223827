"""Wall-time scaling of exact PDP against tree depth.

Builds full 100-tree ensembles at increasing depths, runs exact PDP on a
fixed background, and reports per-depth times and consecutive ratios.
Per-path compilation cost doubles with each depth level, so ratios hover
around 2x.

Usage: python scripts/benchmark_depth_scaling.py [--rows 50000] [--depths 4 9]
"""

import argparse
import time

from pdforest.synth import full_ensemble, random_dataset
from pdforest.tasks import compute_pdp


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=50_000)
    parser.add_argument("--trees", type=int, default=100)
    parser.add_argument("--features", type=int, default=12)
    parser.add_argument("--k", type=int, default=5)
    parser.add_argument("--depths", type=int, nargs=2, default=(4, 9),
                        metavar=("LO", "HI"))
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    background = random_dataset(4242, args.rows, args.features, role="background")
    lo, hi = args.depths
    times = {}
    for depth in range(lo, hi + 1):
        ensemble = full_ensemble(seed=depth, n_trees=args.trees, depth=depth,
                                 n_features=args.features)
        t0 = time.perf_counter()
        compute_pdp(ensemble, background, k=args.k, mode="exact",
                    threads=args.threads)
        times[depth] = time.perf_counter() - t0
        ratio = f"  ({times[depth] / times[depth - 1]:.2f}x)" if depth > lo else ""
        print(f"depth {depth:2d}: {times[depth]:7.2f} s{ratio}", flush=True)
    print(f"total: {sum(times.values()):.1f} s")


if __name__ == "__main__":
    main()
