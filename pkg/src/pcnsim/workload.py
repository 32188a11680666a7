"""Topologies, initial balances and transaction streams.

Each generator is a pure function of its parameters and seed; every purpose
(topology, balances, transactions) draws from its own RNG stream so changing
one never perturbs another.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import networkx as nx
import numpy as np

from .network import PaymentNetwork

log = logging.getLogger(__name__)

TOPOLOGY_STREAM = 0
BALANCE_STREAM = 1
TX_STREAM = 2

DISTRIBUTIONS = ("exponential", "normal")


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


@dataclass(frozen=True)
class TopologySpec:
    kind: str = "barabasi_albert"
    node_count: int = 1000
    attach_count: int = 5
    path: str | None = None

    def __post_init__(self):
        if self.kind == "barabasi_albert":
            if not self.node_count >= self.attach_count >= 1:
                raise ValueError("need node_count >= attach_count >= 1")
        elif self.kind == "snapshot_file":
            if not self.path:
                raise ValueError("snapshot_file topology needs a path")
        else:
            raise ValueError(f"unknown topology kind {self.kind!r}")


@dataclass(frozen=True)
class BalanceSpec:
    distribution: str = "exponential"
    mean: float = 2_400_000.0  # expected total capacity per channel
    normal_sd_ratio: float = 0.25  # sd / mean for the normal draws

    def __post_init__(self):
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"unknown balance distribution {self.distribution!r}")
        if not self.mean > 0:
            raise ValueError("mean balance must be positive")


@dataclass(frozen=True)
class TransactionSpec:
    count: int = 100_000
    value_distribution: str = "exponential"
    scale_factor: float = 0.05
    normal_sd_ratio: float = 0.25
    min_value: float = 1.0  # floor for normal draws

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("need at least one transaction")
        if self.value_distribution not in DISTRIBUTIONS:
            raise ValueError(f"unknown value distribution {self.value_distribution!r}")
        if not self.scale_factor > 0:
            raise ValueError("scale factor must be positive")


@dataclass
class EdgeList:
    n_nodes: int
    edges: list[tuple[int, int]]
    capacities: list[float] | None = None
    dropped: int = 0

    @property
    def average_degree(self) -> float:
        return 2 * len(self.edges) / self.n_nodes if self.n_nodes else 0.0


@dataclass
class Transactions:
    sources: np.ndarray
    dests: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[tuple[int, int, float]]:
        return zip(self.sources.tolist(), self.dests.tolist(), self.values.tolist())

    def __getitem__(self, i: int) -> tuple[int, int, float]:
        return int(self.sources[i]), int(self.dests[i]), float(self.values[i])

    @classmethod
    def from_records(cls, records: Sequence[tuple[int, int, float]]) -> "Transactions":
        src, dst, val = zip(*records) if records else ((), (), ())
        return cls(np.asarray(src, dtype=np.int64), np.asarray(dst, dtype=np.int64),
                   np.asarray(val, dtype=np.float64))


def generate_ba(node_count: int, attach_count: int, seed: int) -> EdgeList:
    """Preferential-attachment graph with ``(node_count - attach_count) * attach_count`` edges."""
    if not node_count > attach_count >= 1:
        raise ValueError(f"need node_count > attach_count >= 1, got {node_count}, {attach_count}")
    g = nx.barabasi_albert_graph(node_count, attach_count, seed=int(_rng(seed, TOPOLOGY_STREAM).integers(2**32)))
    edges = sorted((min(u, v), max(u, v)) for u, v in g.edges())
    return EdgeList(node_count, edges)


class SnapshotParseError(ValueError):
    pass


def load_snapshot(path: str | Path) -> EdgeList:
    """Read a whitespace edge list: ``u v`` or ``u v capacity`` per line, ``#`` comments.

    Self-loops and repeated channels are dropped and counted in ``dropped``.
    """
    edges: list[tuple[int, int]] = []
    caps: list[float] = []
    seen: set[tuple[int, int]] = set()
    dropped = 0
    has_caps = None
    max_id = -1
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise SnapshotParseError(f"{path}:{lineno}: expected 'u v [capacity]', got {raw.strip()!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
                cap = float(parts[2]) if len(parts) == 3 else None
            except ValueError:
                raise SnapshotParseError(f"{path}:{lineno}: bad number in {raw.strip()!r}") from None
            if u < 0 or v < 0:
                raise SnapshotParseError(f"{path}:{lineno}: node ids must be non-negative")
            if cap is not None and not cap > 0:
                raise SnapshotParseError(f"{path}:{lineno}: capacity must be positive")
            if has_caps is None:
                has_caps = cap is not None
            elif has_caps != (cap is not None):
                raise SnapshotParseError(f"{path}:{lineno}: mixed lines with and without capacity")
            key = (min(u, v), max(u, v))
            if u == v or key in seen:
                dropped += 1
                continue
            seen.add(key)
            edges.append(key)
            if cap is not None:
                caps.append(cap)
            max_id = max(max_id, u, v)
    result = EdgeList(max_id + 1, edges, caps if has_caps else None, dropped)
    if dropped:
        log.warning("%s: dropped %d self-loop/duplicate line(s)", path, dropped)
    log.info("%s: %d nodes, average degree %.2f", path, result.n_nodes, result.average_degree)
    return result


def giant_component(graph: EdgeList) -> tuple[EdgeList, list[int]]:
    """Restrict to the largest connected component, relabelled densely.

    Returns the restricted edge list and the excluded original node ids.
    """
    g = nx.Graph()
    g.add_nodes_from(range(graph.n_nodes))
    g.add_edges_from(graph.edges)
    keep = max(nx.connected_components(g), key=len) if graph.n_nodes else set()
    excluded = sorted(set(range(graph.n_nodes)) - keep)
    if not excluded:
        return graph, []
    relabel = {old: new for new, old in enumerate(sorted(keep))}
    edges, caps = [], []
    for i, (u, v) in enumerate(graph.edges):
        if u in relabel and v in relabel:
            edges.append((relabel[u], relabel[v]))
            if graph.capacities is not None:
                caps.append(graph.capacities[i])
    log.warning("excluded %d node(s) outside the giant component", len(excluded))
    return EdgeList(len(keep), edges, caps if graph.capacities is not None else None,
                    graph.dropped), excluded


def _positive_normal(rng, mean, sd, size, floor):
    out = rng.normal(mean, sd, size)
    bad = out <= floor
    while bad.any():
        out[bad] = rng.normal(mean, sd, int(bad.sum()))
        bad = out <= floor
    return out


def init_balances(graph: EdgeList, spec: BalanceSpec, seed: int) -> PaymentNetwork:
    """Draw both directed balances of every channel; reference point at half capacity.

    Without snapshot capacities each direction is drawn independently with
    mean ``spec.mean / 2``. With capacities, the forward share is a uniform
    fraction of the channel's capacity.
    """
    rng = _rng(seed, BALANCE_STREAM)
    m = len(graph.edges)
    if graph.capacities is not None:
        caps = np.asarray(graph.capacities, dtype=np.float64)
        fwd = rng.uniform(0.0, 1.0, m) * caps
        rev = caps - fwd
    else:
        half = spec.mean / 2
        if spec.distribution == "exponential":
            draws = rng.exponential(half, (m, 2))
        else:
            draws = _positive_normal(rng, half, half * spec.normal_sd_ratio, (m, 2), 0.0)
        # a zero-capacity channel is not worth establishing
        empty = draws.sum(axis=1) <= 0
        while empty.any():
            draws[empty] = rng.exponential(half, (int(empty.sum()), 2))
            empty = draws.sum(axis=1) <= 0
        fwd, rev = draws[:, 0], draws[:, 1]
    channels = [(u, v, float(a), float(b)) for (u, v), a, b in zip(graph.edges, fwd, rev)]
    return PaymentNetwork(graph.n_nodes, channels)


def generate_transactions(node_ids: Sequence[int] | int, spec: TransactionSpec, init: float,
                          seed: int) -> Transactions:
    """Uniform distinct (source, destination) pairs with values of mean ``scale_factor * init``."""
    nodes = np.arange(node_ids) if isinstance(node_ids, int) else np.asarray(node_ids, dtype=np.int64)
    if len(nodes) < 2:
        raise ValueError("need at least two nodes")
    rng = _rng(seed, TX_STREAM)
    n = spec.count
    src_idx = rng.integers(len(nodes), size=n)
    # shift the destination so it never equals the source
    dst_idx = (src_idx + 1 + rng.integers(len(nodes) - 1, size=n)) % len(nodes)
    mean = spec.scale_factor * init
    if spec.value_distribution == "exponential":
        values = rng.exponential(mean, n)
        zero = values <= 0
        while zero.any():
            values[zero] = rng.exponential(mean, int(zero.sum()))
            zero = values <= 0
    else:
        values = np.maximum(rng.normal(mean, mean * spec.normal_sd_ratio, n), spec.min_value)
    return Transactions(nodes[src_idx].astype(np.int64), nodes[dst_idx].astype(np.int64), values)
