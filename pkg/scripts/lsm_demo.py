#!/usr/bin/env python3
"""Point-query read counts over a stack of immutable runs.

Builds N runs with per-run cascade filters, then issues present and absent
queries and prints how many runs each query actually read.  The exclusion
pass at run-add time caps non-containing reads at one per query.
"""

import argparse
from collections import Counter

import numpy as np

from chainedfilter.apps.lsm import LsmLevel, lsm_add_run, lsm_point_query


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--run-size", type=int, default=10_000)
    ap.add_argument("--queries", type=int, default=50_000)
    ap.add_argument("--seed", type=int, default=0xC0FFEE)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    total = args.runs * args.run_size
    keys = np.unique(rng.integers(0, 1 << 62, size=total + 1024,
                                  dtype=np.uint64))[:total]
    level = LsmLevel(seed=args.seed)
    for i in range(args.runs):
        lsm_add_run(level, keys[i * args.run_size:(i + 1) * args.run_size])
    print(f"{args.runs} runs x {args.run_size} keys, "
          f"{level.exclusions} exclusions, "
          f"{level.size_bits / total:.2f} bits/key")

    present = rng.choice(keys, size=args.queries // 2, replace=False)
    absent = np.unique(rng.integers(0, 1 << 62, size=args.queries // 2,
                                    dtype=np.uint64))
    absent = absent[~np.isin(absent, keys)]

    for name, probe_keys in (("present", present), ("absent", absent)):
        reads = Counter()
        misses = 0
        for k in probe_keys:
            res = lsm_point_query(level, int(k), check_oracle=True)
            extra = res.runs_read - (1 if res.found_in is not None else 0)
            reads[extra] += 1
            misses += (name == "present") and res.found_in is None
        hist = ", ".join(f"{c}x{n}" for n, c in sorted(reads.items()))
        print(f"{name}: {probe_keys.size} queries, extra reads [{hist}], "
              f"false negatives {misses}")


if __name__ == "__main__":
    main()
