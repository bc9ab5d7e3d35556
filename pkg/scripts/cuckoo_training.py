#!/usr/bin/env python3
"""Training curves of the table-placement predictor.

Fills a two-table cuckoo hash, attaches a layered predictor in each variant
(deepest layer as an exact classifier, or Bloom layers all the way down),
and prints the per-round error rate until it reaches zero, plus the probe
count the trained predictor buys on lookups.
"""

import argparse

from chainedfilter.apps.cuckoo import PredictedCuckoo, build_table
from chainedfilter.bounds import cuckoo_negative_ratio


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--num-slots", type=int, default=500_000)
    ap.add_argument("--load", type=float, default=0.4)
    ap.add_argument("--seed", type=int, default=0xC0FFEE)
    args = ap.parse_args()

    table = build_table(args.num_slots, args.load, seed=args.seed)
    law = cuckoo_negative_ratio(args.load)
    print(f"stored {table.count} keys, lambda measured "
          f"{table.lambda_measured:.4f} vs law {law:.4f}, "
          f"rebuilds {table.rebuilds}")

    for label, use_othello in (("othello terminal", True),
                               ("bloom only", False)):
        pc = PredictedCuckoo(table, use_othello=use_othello,
                             seed=args.seed + 1)
        rounds = pc.train_to_zero(max_rounds=32)
        curve = ", ".join(f"{r:.4f}" for r in pc.error_history)
        keys, _ = table.stored()
        probes = pc.mean_probes(keys[: min(keys.size, 50_000)])
        print(f"{label}: {pc.space_bits / 1e6:.4f} Mb, "
              f"{rounds} rounds [{curve}], mean probes {probes:.4f}")


if __name__ == "__main__":
    main()
