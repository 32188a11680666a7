"""Success ratio for every fee policy over k = 1..d (desk-scale analog of the k sweep)."""

import argparse
import dataclasses

from pcnsim import FeePolicy, RunConfig, TopologySpec, TransactionSpec, run_batch

POLICIES = ("lightning", "distasi", "merchant_v1", "merchant_v2")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, default=1000)
    ap.add_argument("--tx", type=int, default=20_000)
    ap.add_argument("--d", type=int, default=10)
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    base = RunConfig(d=args.d, topology=TopologySpec(node_count=args.nodes),
                     transactions=TransactionSpec(count=args.tx))
    configs = [dataclasses.replace(base, policy=FeePolicy(p), k=k)
               for p in POLICIES for k in range(1, args.d + 1)]
    batches = run_batch(configs, args.reps, jobs=args.jobs)

    table = {(b.config.policy.kind, b.config.k): b.success for b in batches}
    print("k   " + "".join(f"{p:>20}" for p in POLICIES))
    for k in range(1, args.d + 1):
        cells = "".join(f"{table[(p, k)][0]:>13.4f} ±{table[(p, k)][1]:.3f}" for p in POLICIES)
        print(f"{k:<4}{cells}")


if __name__ == "__main__":
    main()
