"""Success per batch of transactions over a long stream, one run per fee policy."""

import argparse

import numpy as np

from pcnsim import FeePolicy, RunConfig, TopologySpec, TransactionSpec, run

POLICIES = ("lightning", "distasi", "merchant_v1", "merchant_v2")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, default=1000)
    ap.add_argument("--tx", type=int, default=100_000)
    ap.add_argument("--d", type=int, default=10)
    ap.add_argument("--k", type=int, default=3)
    ap.add_argument("--window", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", help="write the long-format series here")
    args = ap.parse_args()

    series = {}
    for p in POLICIES:
        cfg = RunConfig(d=args.d, k=args.k, policy=FeePolicy(p), seed=args.seed,
                        window_size=args.window, topology=TopologySpec(node_count=args.nodes),
                        transactions=TransactionSpec(count=args.tx))
        series[p] = run(cfg).windowed_success
        s = series[p]
        print(f"{p:<12} first10={np.mean(s[:10]):.4f} last10={np.mean(s[-10:]):.4f} final={s[-1]:.4f}")

    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("fee_policy,window,success\n")
            for p, s in series.items():
                for i, v in enumerate(s):
                    fh.write(f"{p},{i},{v:.9g}\n")


if __name__ == "__main__":
    main()
