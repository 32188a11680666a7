"""Cheapest-path source routing against the best multipath configuration with k <= 5."""

import argparse
import dataclasses

from pcnsim import FeePolicy, RunConfig, TopologySpec, TransactionSpec, run_batch

POLICIES = ("lightning", "distasi", "merchant_v1", "merchant_v2")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, default=1000)
    ap.add_argument("--tx", type=int, default=20_000)
    ap.add_argument("--reps", type=int, default=5)
    args = ap.parse_args()

    base = RunConfig(d=10, topology=TopologySpec(node_count=args.nodes),
                     transactions=TransactionSpec(count=args.tx))
    for p in POLICIES:
        multi = run_batch([dataclasses.replace(base, policy=FeePolicy(p), k=k) for k in (1, 2, 3, 5)],
                          args.reps)
        best = max(multi, key=lambda b: b.success[0])
        (cheap,) = run_batch([dataclasses.replace(base, policy=FeePolicy(p), router="cheapest_path")],
                             args.reps)
        print(f"{p:<12} cheapest_path={cheap.success[0]:.4f}  "
              f"best multipath k={best.config.k}: {best.success[0]:.4f}")


if __name__ == "__main__":
    main()
