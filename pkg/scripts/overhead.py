"""Mean messages per successful transaction as the number of trees grows (k = 1)."""

import argparse
import dataclasses

from pcnsim import FeePolicy, RunConfig, TopologySpec, TransactionSpec, run_batch

POLICIES = ("lightning", "distasi", "merchant_v1", "merchant_v2")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, default=1000)
    ap.add_argument("--tx", type=int, default=20_000)
    ap.add_argument("--d", type=int, nargs="+", default=[1, 2, 3, 5, 7, 10])
    ap.add_argument("--reps", type=int, default=5)
    args = ap.parse_args()

    base = RunConfig(k=1, topology=TopologySpec(node_count=args.nodes),
                     transactions=TransactionSpec(count=args.tx))
    configs = [dataclasses.replace(base, policy=FeePolicy(p), d=d) for p in POLICIES for d in args.d]
    msgs = {(b.config.policy.kind, b.config.d): b.messages[0] for b in run_batch(configs, args.reps)}
    print("d   " + "".join(f"{p:>14}" for p in POLICIES))
    for d in args.d:
        print(f"{d:<4}" + "".join(f"{msgs[(p, d)]:>14.2f}" for p in POLICIES))


if __name__ == "__main__":
    main()
