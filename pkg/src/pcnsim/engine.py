"""Sequential transaction simulation and batch aggregation."""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .fees import FeePolicy
from .network import PaymentNetwork
from .routing import (DijkstraBuffers, MultipathBuffers, TreeEmbedding, build_trees,
                      cheapest_step, multipath_step, stack_trees)
from .workload import (BalanceSpec, TopologySpec, Transactions, TransactionSpec, generate_ba,
                       generate_transactions, giant_component, init_balances, load_snapshot)

log = logging.getLogger(__name__)

SUCCESS = 0
ROUTING_FAILURE = 1
CAPACITY_FAILURE = 2
OUTCOMES = ("success", "routing_failure", "capacity_failure")

ROUTERS = ("multipath", "cheapest_path")


@dataclass(frozen=True)
class RunConfig:
    router: str = "multipath"
    d: int = 10
    k: int = 1
    policy: FeePolicy = field(default_factory=FeePolicy)
    topology: TopologySpec = field(default_factory=TopologySpec)
    balances: BalanceSpec = field(default_factory=BalanceSpec)
    transactions: TransactionSpec = field(default_factory=TransactionSpec)
    seed: int = 0
    window_size: int = 1000

    def __post_init__(self):
        if self.router not in ROUTERS:
            raise ValueError(f"unknown router {self.router!r}; choose from {ROUTERS}")
        if self.router == "multipath" and not 1 <= self.k <= self.d:
            raise ValueError(f"need 1 <= k <= d, got k={self.k}, d={self.d}")
        if self.window_size < 1:
            raise ValueError("window_size must be >= 1")

    def with_seed(self, seed: int) -> "RunConfig":
        return dataclasses.replace(self, seed=seed)


@dataclass
class TransactionRecord:
    index: int
    source: int
    dest: int
    value: float
    outcome: str
    total_fee: float
    messages: int
    paths_used: int


@dataclass
class RunMetrics:
    """Per-transaction outcome arrays plus derived statistics."""

    transactions: Transactions
    outcomes: np.ndarray
    fees: np.ndarray
    messages: np.ndarray
    paths: np.ndarray
    window_size: int = 1000
    initial_capacity: float = 0.0
    final_capacity: float = 0.0
    atomicity_violations: int = 0

    @property
    def count(self) -> int:
        return len(self.outcomes)

    @property
    def successes(self) -> int:
        return int(np.count_nonzero(self.outcomes == SUCCESS))

    def outcome_counts(self) -> dict[str, int]:
        return {name: int(np.count_nonzero(self.outcomes == code)) for code, name in enumerate(OUTCOMES)}

    @property
    def overall_success_ratio(self) -> float:
        return self.successes / self.count if self.count else 0.0

    @property
    def windowed_success(self) -> list[float]:
        ok = self.outcomes == SUCCESS
        return [float(ok[i:i + self.window_size].mean()) for i in range(0, self.count, self.window_size)]

    @property
    def mean_messages_success(self) -> float:
        ok = self.outcomes == SUCCESS
        return float(self.messages[ok].mean()) if ok.any() else 0.0

    @property
    def mean_messages(self) -> float:
        return float(self.messages.mean()) if self.count else 0.0

    @property
    def capacity_drift(self) -> float:
        return abs(self.final_capacity - self.initial_capacity)

    @property
    def records(self) -> list[TransactionRecord]:
        return [
            TransactionRecord(i, s, t, v, OUTCOMES[o], float(f), int(m), int(p))
            for i, ((s, t, v), o, f, m, p) in enumerate(zip(
                self.transactions, self.outcomes.tolist(), self.fees, self.messages, self.paths))
        ]

    def summary(self, seed: int | None = None) -> "RunSummary":
        return RunSummary(seed, self.overall_success_ratio, self.windowed_success,
                          self.mean_messages_success, self.mean_messages,
                          self.outcome_counts(), self.capacity_drift)


@dataclass
class RunSummary:
    seed: int | None
    success_ratio: float
    windowed_success: list[float]
    mean_messages_success: float
    mean_messages: float
    outcome_counts: dict[str, int]
    capacity_drift: float


def _mean_std(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    if len(arr) < 2:
        return float(arr.mean()) if len(arr) else 0.0, 0.0
    return float(arr.mean()), float(arr.std(ddof=1))


@dataclass
class BatchResult:
    config: RunConfig
    runs: list[RunSummary]

    @property
    def success(self) -> tuple[float, float]:
        return _mean_std([r.success_ratio for r in self.runs])

    @property
    def messages(self) -> tuple[float, float]:
        return _mean_std([r.mean_messages_success for r in self.runs])

    @property
    def windowed(self) -> list[tuple[float, float]]:
        series = [r.windowed_success for r in self.runs]
        length = min(len(s) for s in series)
        return [_mean_std([s[i] for s in series]) for i in range(length)]


# ---------------------------------------------------------------------------


def simulate(net: PaymentNetwork, transactions: Transactions, policy: FeePolicy, *,
             router: str = "multipath", trees: list[TreeEmbedding] | None = None,
             d: int = 1, k: int = 1, window_size: int = 1000,
             check_atomicity: bool = False) -> RunMetrics:
    """Route and settle every transaction in order, mutating ``net``.

    With ``check_atomicity`` each failed payment is verified to leave the
    network state hash untouched (slower: one Python call per transaction).
    """
    n = len(transactions)
    outcomes = np.zeros(n, dtype=np.int8)
    fees = np.zeros(n)
    messages = np.zeros(n, dtype=np.int64)
    paths = np.zeros(n, dtype=np.int64)
    initial = net.total_capacity()
    net_args = (net.indptr, net.nbr, net.out_edge, net.fwd, net.cap, net.ref,
                policy.code, policy.params)
    src, dst, val = transactions.sources, transactions.dests, transactions.values

    if router == "multipath":
        if trees is None or len(trees) < d:
            raise ValueError(f"multipath routing needs {d} trees")
        if not 1 <= k <= d:
            raise ValueError(f"need 1 <= k <= d, got k={k}, d={d}")
        parents, depths = stack_trees(trees[:d])
        buf = MultipathBuffers(d, net.n_nodes, net.n_channels).as_tuple()

        def step(i):
            return multipath_step(*net_args, parents, depths, d, k, src[i], dst[i], val[i],
                                  net.n_nodes, *buf)

        def run_all():
            _run_multipath(*net_args, parents, depths, d, k, net.n_nodes, src, dst, val,
                           outcomes, fees, messages, paths, *buf)
    elif router == "cheapest_path":
        buf = DijkstraBuffers(net.n_nodes, net.n_channels).as_tuple()

        def step(i):
            return cheapest_step(*net_args, src[i], dst[i], val[i], *buf)

        def run_all():
            _run_cheapest(*net_args, src, dst, val, outcomes, fees, messages, paths, *buf)
    else:
        raise ValueError(f"unknown router {router!r}")

    violations = 0
    if check_atomicity:
        for i in range(n):
            before = net.state_hash()
            outcomes[i], fees[i], messages[i], paths[i] = step(i)
            if outcomes[i] != SUCCESS and net.state_hash() != before:
                violations += 1
    else:
        run_all()
    return RunMetrics(transactions, outcomes, fees, messages, paths, window_size,
                      initial, net.total_capacity(), violations)


@numba.njit(cache=True)
def _run_multipath(indptr, nbr, out_edge, fwd, cap, ref, code, params, parents, depths, d, k,
                   max_hops, src, dst, val, outcomes, fees, messages, paths, path_edges,
                   path_len, path_loads, path_fees, fee, status, chosen, agg, flat_edges,
                   flat_loads, saved):
    for i in range(len(val)):
        o, f, m, p = multipath_step(indptr, nbr, out_edge, fwd, cap, ref, code, params,
                                    parents, depths, d, k, src[i], dst[i], val[i], max_hops,
                                    path_edges, path_len, path_loads, path_fees, fee, status,
                                    chosen, agg, flat_edges, flat_loads, saved)
        outcomes[i] = o
        fees[i] = f
        messages[i] = m
        paths[i] = p


@numba.njit(cache=True)
def _run_cheapest(indptr, nbr, out_edge, fwd, cap, ref, code, params, src, dst, val,
                  outcomes, fees, messages, paths, dist, load, pred, visited, heap_key,
                  heap_node, path_edges, path_loads, path_fees, saved):
    for i in range(len(val)):
        o, f, m, p = cheapest_step(indptr, nbr, out_edge, fwd, cap, ref, code, params, src[i],
                                   dst[i], val[i], dist, load, pred, visited, heap_key,
                                   heap_node, path_edges, path_loads, path_fees, saved)
        outcomes[i] = o
        fees[i] = f
        messages[i] = m
        paths[i] = p


def build_network(config: RunConfig) -> PaymentNetwork:
    topo = config.topology
    if topo.kind == "barabasi_albert":
        graph = generate_ba(topo.node_count, topo.attach_count, config.seed)
    else:
        graph, excluded = giant_component(load_snapshot(topo.path))
        if excluded:
            log.warning("snapshot: %d node(s) outside the giant component excluded", len(excluded))
    return init_balances(graph, config.balances, config.seed)


def run(config: RunConfig, check_atomicity: bool = False) -> RunMetrics:
    net = build_network(config)
    txs = generate_transactions(net.n_nodes, config.transactions, config.balances.mean, config.seed)
    trees = build_trees(net, config.d, config.seed) if config.router == "multipath" else None
    return simulate(net, txs, config.policy, router=config.router, trees=trees, d=config.d,
                    k=config.k, window_size=config.window_size, check_atomicity=check_atomicity)


def _run_summary(config: RunConfig) -> RunSummary:
    return run(config).summary(config.seed)


def run_batch(configs: list[RunConfig], repetitions: int, jobs: int = 1) -> list[BatchResult]:
    """Run each config with seeds ``seed .. seed + repetitions - 1``."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    work = [c.with_seed(c.seed + r) for c in configs for r in range(repetitions)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(_run_summary, work))
    else:
        summaries = [_run_summary(c) for c in work]
    return [BatchResult(c, summaries[i * repetitions:(i + 1) * repetitions])
            for i, c in enumerate(configs)]


def capacity_close(a: float, b: float, tol: float = 1e-6) -> bool:
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)
