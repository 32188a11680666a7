"""Payment channel network simulator with balance-aware fee policies and tree-based multipath routing."""

from .engine import BatchResult, RunConfig, RunMetrics, run, run_batch, simulate
from .fees import FeePolicy, path_fees, total_fee
from .network import PaymentNetwork, apply_payment
from .routing import (RoutingFailure, build_trees, route_cheapest_path, route_multipath,
                      route_tree, tree_distance)
from .workload import (BalanceSpec, TopologySpec, TransactionSpec, generate_ba,
                       generate_transactions, init_balances, load_snapshot)

__all__ = [
    "BalanceSpec", "BatchResult", "FeePolicy", "PaymentNetwork", "RoutingFailure", "RunConfig",
    "RunMetrics", "TopologySpec", "TransactionSpec", "apply_payment", "build_trees",
    "generate_ba", "generate_transactions", "init_balances", "load_snapshot", "path_fees",
    "route_cheapest_path", "route_multipath", "route_tree", "run", "run_batch", "simulate",
    "total_fee", "tree_distance",
]
