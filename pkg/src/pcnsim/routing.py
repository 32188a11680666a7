"""Path discovery.

Two routers live here:

* a tree-embedding router: ``d`` BFS spanning trees give every node a prefix
  coordinate; a probe walks greedily to the neighbour closest to the
  destination in tree distance. ``route_multipath`` probes every tree with
  ``tx / k`` and keeps the ``k`` cheapest successful candidates.
* a source router (``route_cheapest_path``): Dijkstra run backwards from the
  receiver so that each edge's fee can be evaluated on the value it would
  carry. Only total capacities are consulted, never directed balances.

The Python functions wrap numba kernels that the simulator calls directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .fees import FeePolicy, fee_value
from .network import PaymentNetwork, apply_hops, edge_balance, edge_reference

OK = 0
NO_NEIGHBOR = 1
HOP_CAP = 2
LOAD_EXCEEDS_BALANCE = 3

_STATUS_TEXT = {
    NO_NEIGHBOR: "no eligible neighbour",
    HOP_CAP: "hop cap exceeded",
    LOAD_EXCEEDS_BALANCE: "fee-inflated load exceeds balance",
}

TREE_STREAM = 3


class RoutingFailure(Exception):
    def __init__(self, reason: str, messages: int = 0):
        super().__init__(reason)
        self.reason = reason
        self.messages = messages


class DisconnectedNetworkError(ValueError):
    def __init__(self, excluded: list[int]):
        preview = ", ".join(map(str, excluded[:10]))
        more = "..." if len(excluded) > 10 else ""
        super().__init__(f"{len(excluded)} node(s) unreachable from the giant component: {preview}{more}")
        self.excluded = excluded


@dataclass
class TreeEmbedding:
    tree_index: int
    root: int
    parent: np.ndarray  # root's parent is -1
    depth: np.ndarray
    child_index: np.ndarray  # position among the parent's children, -1 at root
    _coords: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_parents(cls, parent, tree_index: int = 0) -> "TreeEmbedding":
        """Build an embedding from a parent array (root marked with -1)."""
        parent = np.asarray(parent, dtype=np.int64)
        n = len(parent)
        roots = np.flatnonzero(parent < 0)
        if len(roots) != 1:
            raise ValueError("parent array must contain exactly one root")
        depth = np.full(n, -1, dtype=np.int64)
        depth[roots[0]] = 0
        for v in range(n):
            chain = []
            u = v
            while depth[u] < 0:
                chain.append(u)
                u = parent[u]
                if len(chain) > n:
                    raise ValueError("parent array contains a cycle")
            for w in reversed(chain):
                depth[w] = depth[parent[w]] + 1
        child_index = np.full(n, -1, dtype=np.int64)
        counter = np.zeros(n, dtype=np.int64)
        for v in range(n):
            p = parent[v]
            if p >= 0:
                child_index[v] = counter[p]
                counter[p] += 1
        return cls(tree_index, int(roots[0]), parent, depth, child_index)

    def coordinate(self, u: int) -> tuple[int, ...]:
        coord = self._coords.get(u)
        if coord is None:
            path = []
            v = u
            while self.parent[v] >= 0:
                path.append(int(self.child_index[v]))
                v = int(self.parent[v])
            coord = self._coords[u] = tuple(reversed(path))
        return coord

    def tree_edges(self) -> list[tuple[int, int]]:
        return [(int(p), v) for v, p in enumerate(self.parent.tolist()) if p >= 0]


@dataclass
class CandidatePath:
    source: int
    nodes: list[int]
    edges: list[int]
    hop_loads: list[float]
    per_hop_fees: list[float]
    path_fee: float
    tree_index: int = -1
    messages: int = 0

    @property
    def hops(self) -> list[tuple[int, int]]:
        return list(zip(self.nodes[:-1], self.nodes[1:]))

    @property
    def carried_value(self) -> float:
        return self.hop_loads[0] if self.hop_loads else 0.0


@dataclass
class RoutePlan:
    tx: float
    selected: list[CandidatePath]
    candidates_probed: int
    candidates_found: int
    total_fee: float
    messages: int
    candidates: list[CandidatePath] = field(default_factory=list)

    @property
    def source_outflow(self) -> float:
        return sum(p.carried_value for p in self.selected)


# ---------------------------------------------------------------------------
# trees


def build_trees(net: PaymentNetwork, d: int, seed: int,
                roots: list[int] | None = None) -> list[TreeEmbedding]:
    """``d`` BFS spanning trees with random roots and random parent choice.

    Tree ``t`` depends only on ``(net, seed, t)``, so the first trees of a
    larger budget equal those of a smaller one. ``roots`` pins the roots.
    """
    if d < 1:
        raise ValueError("need at least one tree")
    if roots is not None and len(roots) != d:
        raise ValueError("need one root per tree")
    return [_bfs_tree(net, t, np.random.default_rng([seed, TREE_STREAM, t]),
                      None if roots is None else roots[t]) for t in range(d)]


def _bfs_tree(net: PaymentNetwork, index: int, rng: np.random.Generator,
              root: int | None) -> TreeEmbedding:
    n = net.n_nodes
    drawn = int(rng.integers(n))
    root = drawn if root is None else root
    depth = np.full(n, -1, dtype=np.int64)
    parent = np.full(n, -1, dtype=np.int64)
    depth[root] = 0
    layer = [root]
    while layer:
        level = depth[layer[0]] + 1
        candidates: dict[int, list[int]] = {}
        for u in layer:
            for v in net.neighbors(u):
                if depth[v] < 0 or depth[v] == level:
                    depth[v] = level
                    candidates.setdefault(v, []).append(u)
        nxt = sorted(candidates)
        for v in nxt:
            opts = candidates[v]
            parent[v] = opts[int(rng.integers(len(opts)))] if len(opts) > 1 else opts[0]
        layer = nxt
    unreached = np.flatnonzero(depth < 0).tolist()
    if unreached:
        raise DisconnectedNetworkError(unreached)
    # children are numbered in ascending id order
    return TreeEmbedding.from_parents(parent, index)


def tree_distance(emb: TreeEmbedding, u: int, v: int) -> int:
    cu, cv = emb.coordinate(u), emb.coordinate(v)
    common = 0
    for a, b in zip(cu, cv):
        if a != b:
            break
        common += 1
    return len(cu) + len(cv) - 2 * common


def stack_trees(embeddings: list[TreeEmbedding]) -> tuple[np.ndarray, np.ndarray]:
    parents = np.ascontiguousarray(np.stack([e.parent for e in embeddings]))
    depths = np.ascontiguousarray(np.stack([e.depth for e in embeddings]))
    return parents, depths


# ---------------------------------------------------------------------------
# public routing API


def _candidate(net, source, edges, loads, fees, tree_index=-1, messages=0) -> CandidatePath:
    nodes = [source]
    for e in edges:
        nodes.append(net.edge_nodes(int(e))[1])
    return CandidatePath(
        source=source,
        nodes=nodes,
        edges=[int(e) for e in edges],
        hop_loads=[float(x) for x in loads],
        per_hop_fees=[float(x) for x in fees],
        path_fee=float(sum(fees)),
        tree_index=tree_index,
        messages=messages,
    )


def route_tree(net: PaymentNetwork, emb: TreeEmbedding, policy: FeePolicy,
               source: int, dest: int, amount: float) -> CandidatePath:
    if not amount > 0:
        raise ValueError("amount must be positive")
    if source == dest:
        return CandidatePath(source, [source], [], [], [], 0.0, emb.tree_index, 0)
    n = net.n_nodes
    edges = np.empty(n, dtype=np.int64)
    loads = np.empty(n)
    fees = np.empty(n)
    length, status = greedy_walk(net.indptr, net.nbr, net.out_edge, net.fwd, net.cap,
                                 emb.parent, emb.depth, source, dest, amount, n, edges)
    if status == OK:
        status = finish_path(policy.code, policy.params, net.fwd, net.cap, net.ref,
                             edges, length, amount, fees, loads)
    if status != OK:
        raise RoutingFailure(_STATUS_TEXT[status], messages=length)
    return _candidate(net, source, edges[:length], loads[:length], fees[:length],
                      emb.tree_index, length)


class MultipathBuffers:
    """Scratch arrays reused across probes."""

    def __init__(self, d: int, n_nodes: int, n_channels: int):
        self.path_edges = np.zeros((d, n_nodes), dtype=np.int64)
        self.path_len = np.zeros(d, dtype=np.int64)
        self.path_loads = np.zeros((d, n_nodes))
        self.path_fees = np.zeros((d, n_nodes))
        self.fee = np.zeros(d)
        self.status = np.zeros(d, dtype=np.int64)
        self.chosen = np.zeros(d, dtype=np.int64)
        self.agg = np.zeros(2 * n_channels)
        self.flat_edges = np.zeros(d * n_nodes, dtype=np.int64)
        self.flat_loads = np.zeros(d * n_nodes)
        self.saved = np.zeros(d * n_nodes)

    def as_tuple(self):
        return (self.path_edges, self.path_len, self.path_loads, self.path_fees, self.fee,
                self.status, self.chosen, self.agg, self.flat_edges, self.flat_loads, self.saved)


def route_multipath(net: PaymentNetwork, embeddings: list[TreeEmbedding], policy: FeePolicy,
                    source: int, dest: int, tx: float, d: int, k: int) -> RoutePlan:
    """Probe ``d`` trees with ``tx / k`` each and keep the ``k`` cheapest."""
    if not 1 <= k <= d <= len(embeddings):
        raise ValueError(f"need 1 <= k <= d <= {len(embeddings)}, got k={k}, d={d}")
    if not tx > 0:
        raise ValueError("transaction value must be positive")
    if source == dest:
        return RoutePlan(tx, [], d, d, 0.0, 0)
    parents, depths = stack_trees(embeddings[:d])
    buf = MultipathBuffers(d, net.n_nodes, net.n_channels)
    amount = tx / k
    messages = probe_all(net.indptr, net.nbr, net.out_edge, net.fwd, net.cap, net.ref,
                         policy.code, policy.params, parents, depths, d, source, dest,
                         amount, net.n_nodes, buf.path_edges, buf.path_len, buf.path_loads,
                         buf.path_fees, buf.fee, buf.status)
    found = select_cheapest(buf.status, buf.fee, d, k, buf.chosen)
    if found < k:
        raise RoutingFailure(f"only {found} of {k} required paths found", messages)
    if not aggregate_fits(net.fwd, net.cap, buf.path_edges, buf.path_len, buf.path_loads,
                          buf.chosen, k, buf.agg):
        raise RoutingFailure("aggregate load exceeds balance", messages)
    candidates = {}
    for t in np.flatnonzero(buf.status[:d] == OK).tolist():
        ln = buf.path_len[t]
        candidates[t] = _candidate(net, source, buf.path_edges[t, :ln], buf.path_loads[t, :ln],
                                   buf.path_fees[t, :ln], t, int(ln))
    selected = [candidates[t] for t in buf.chosen[:k].tolist()]
    return RoutePlan(tx, selected, d, found, float(sum(p.path_fee for p in selected)),
                     int(messages), list(candidates.values()))


class DijkstraBuffers:
    def __init__(self, n_nodes: int, n_channels: int):
        self.dist = np.zeros(n_nodes)
        self.load = np.zeros(n_nodes)
        self.pred = np.zeros(n_nodes, dtype=np.int64)
        self.visited = np.zeros(n_nodes, dtype=np.bool_)
        size = 2 * n_channels + 2
        self.heap_key = np.zeros(size)
        self.heap_node = np.zeros(size, dtype=np.int64)
        self.path_edges = np.zeros(n_nodes, dtype=np.int64)
        self.path_loads = np.zeros(n_nodes)
        self.path_fees = np.zeros(n_nodes)
        self.saved = np.zeros(n_nodes)

    def as_tuple(self):
        return (self.dist, self.load, self.pred, self.visited, self.heap_key, self.heap_node,
                self.path_edges, self.path_loads, self.path_fees, self.saved)


def route_cheapest_path(net: PaymentNetwork, policy: FeePolicy, source: int, dest: int,
                        tx: float) -> RoutePlan:
    """Cheapest single path under the total-capacity filter.

    Balance shortfalls are not detected here; they surface when the plan is
    applied with :func:`pcnsim.network.apply_payment`.
    """
    if not tx > 0:
        raise ValueError("transaction value must be positive")
    if source == dest:
        return RoutePlan(tx, [], 1, 1, 0.0, 0)
    b = DijkstraBuffers(net.n_nodes, net.n_channels)
    length = cheapest_path(net.indptr, net.nbr, net.out_edge, net.fwd, net.cap, net.ref,
                           policy.code, policy.params, source, dest, tx, b.dist, b.load,
                           b.pred, b.visited, b.heap_key, b.heap_node, b.path_edges,
                           b.path_loads, b.path_fees)
    if length < 0:
        raise RoutingFailure("no path under total-capacity filter")
    path = _candidate(net, source, b.path_edges[:length], b.path_loads[:length],
                      b.path_fees[:length], -1, 0)
    return RoutePlan(tx, [path], 1, 1, path.path_fee, 0)


# ---------------------------------------------------------------------------
# numba kernels


@numba.njit(cache=True)
def tree_dist(parent, depth, u, v):
    du = depth[u]
    dv = depth[v]
    dist = 0
    while du > dv:
        u = parent[u]
        du -= 1
        dist += 1
    while dv > du:
        v = parent[v]
        dv -= 1
        dist += 1
    while u != v:
        u = parent[u]
        v = parent[v]
        dist += 2
    return dist


@numba.njit(cache=True)
def greedy_walk(indptr, nbr, out_edge, fwd, cap, parent, depth, source, dest, amount,
                max_hops, path_edges):
    """Returns ``(length, status)``; ``length`` hops were forwarded."""
    cur = source
    cur_dist = tree_dist(parent, depth, cur, dest)
    length = 0
    while cur != dest:
        if length >= max_hops:
            return length, HOP_CAP
        best = -1
        best_edge = -1
        best_dist = cur_dist
        for i in range(indptr[cur], indptr[cur + 1]):
            e = out_edge[i]
            if edge_balance(fwd, cap, e) < amount:
                continue
            w = nbr[i]
            dw = tree_dist(parent, depth, w, dest)
            if dw < best_dist:
                best_dist = dw
                best = w
                best_edge = e
        if best < 0:
            return length, NO_NEIGHBOR
        path_edges[length] = best_edge
        length += 1
        cur = best
        cur_dist = best_dist
    return length, OK


@numba.njit(cache=True)
def finish_path(code, params, fwd, cap, ref, path_edges, length, amount, fees, loads):
    """Backward fee recursion over a found path, then per-hop feasibility."""
    load = amount
    for j in range(length - 1, 0, -1):
        e = path_edges[j]
        c_minus = edge_balance(fwd, cap, e)
        loads[j] = load
        f = fee_value(code, params, c_minus, cap[e >> 1] - c_minus,
                      edge_reference(cap, ref, e), load)
        fees[j] = f
        load += f
    if length > 0:
        loads[0] = load
        fees[0] = 0.0
    for j in range(length):
        if loads[j] > edge_balance(fwd, cap, path_edges[j]):
            return LOAD_EXCEEDS_BALANCE
    return OK


@numba.njit(cache=True)
def probe_all(indptr, nbr, out_edge, fwd, cap, ref, code, params, parents, depths, d,
              source, dest, amount, max_hops, path_edges, path_len, path_loads, path_fees,
              fee, status):
    messages = 0
    for t in range(d):
        length, st = greedy_walk(indptr, nbr, out_edge, fwd, cap, parents[t], depths[t],
                                 source, dest, amount, max_hops, path_edges[t])
        messages += length
        path_len[t] = length
        if st == OK:
            st = finish_path(code, params, fwd, cap, ref, path_edges[t], length, amount,
                             path_fees[t], path_loads[t])
        status[t] = st
        if st == OK:
            total = 0.0
            for j in range(length):
                total += path_fees[t, j]
            fee[t] = total
        else:
            fee[t] = np.inf
    return messages


@numba.njit(cache=True)
def select_cheapest(status, fee, d, k, chosen):
    """Fill ``chosen[:k]`` with the cheapest successful trees; returns how many succeeded."""
    found = 0
    for t in range(d):
        if status[t] == OK:
            found += 1
    if found < k:
        return found
    order = np.argsort(fee[:d], kind="mergesort")
    for i in range(k):
        chosen[i] = order[i]
    return found


@numba.njit(cache=True)
def aggregate_fits(fwd, cap, path_edges, path_len, path_loads, chosen, k, agg):
    ok = True
    for i in range(k):
        t = chosen[i]
        for j in range(path_len[t]):
            agg[path_edges[t, j]] += path_loads[t, j]
    for i in range(k):
        t = chosen[i]
        for j in range(path_len[t]):
            e = path_edges[t, j]
            if agg[e] > edge_balance(fwd, cap, e):
                ok = False
    for i in range(k):
        t = chosen[i]
        for j in range(path_len[t]):
            agg[path_edges[t, j]] = 0.0
    return ok


@numba.njit(cache=True)
def multipath_step(indptr, nbr, out_edge, fwd, cap, ref, code, params, parents, depths, d, k,
                   source, dest, tx, max_hops, path_edges, path_len, path_loads, path_fees, fee,
                   status, chosen, agg, flat_edges, flat_loads, saved):
    """Route and commit one payment. Returns ``(outcome, fee, messages, paths)``.

    outcome: 0 success, 1 routing failure, 2 capacity failure.
    """
    amount = tx / k
    messages = probe_all(indptr, nbr, out_edge, fwd, cap, ref, code, params, parents, depths,
                         d, source, dest, amount, max_hops, path_edges, path_len, path_loads,
                         path_fees, fee, status)
    if select_cheapest(status, fee, d, k, chosen) < k:
        return 1, 0.0, messages, 0
    if not aggregate_fits(fwd, cap, path_edges, path_len, path_loads, chosen, k, agg):
        return 1, 0.0, messages, 0
    n = 0
    total = 0.0
    for i in range(k):
        t = chosen[i]
        total += fee[t]
        for j in range(path_len[t]):
            flat_edges[n] = path_edges[t, j]
            flat_loads[n] = path_loads[t, j]
            n += 1
    if apply_hops(fwd, cap, flat_edges, flat_loads, n, saved) >= 0:
        return 2, 0.0, messages, 0
    return 0, total, messages, k


@numba.njit(cache=True)
def _heap_push(keys, nodes, size, key, node):
    i = size
    keys[i] = key
    nodes[i] = node
    while i > 0:
        p = (i - 1) >> 1
        if keys[p] < keys[i] or (keys[p] == keys[i] and nodes[p] <= nodes[i]):
            break
        keys[p], keys[i] = keys[i], keys[p]
        nodes[p], nodes[i] = nodes[i], nodes[p]
        i = p
    return size + 1


@numba.njit(cache=True)
def _heap_pop(keys, nodes, size):
    key = keys[0]
    node = nodes[0]
    size -= 1
    keys[0] = keys[size]
    nodes[0] = nodes[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        c = left
        right = left + 1
        if right < size and (keys[right] < keys[left]
                             or (keys[right] == keys[left] and nodes[right] < nodes[left])):
            c = right
        if keys[i] < keys[c] or (keys[i] == keys[c] and nodes[i] <= nodes[c]):
            break
        keys[c], keys[i] = keys[i], keys[c]
        nodes[c], nodes[i] = nodes[i], nodes[c]
        i = c
    return key, node, size


@numba.njit(cache=True)
def cheapest_path(indptr, nbr, out_edge, fwd, cap, ref, code, params, source, dest, tx,
                  dist, load, pred, visited, heap_key, heap_node, path_edges, path_loads,
                  path_fees):
    """Receiver-rooted Dijkstra; returns the path length or -1.

    ``load[v]`` is the value that must arrive at ``v`` (tx plus the fees of
    every hop after it). An edge ``u -> v`` is usable when its channel's total
    capacity covers ``load[v]``; it costs nothing when ``u`` is the sender.
    """
    n = dist.shape[0]
    for i in range(n):
        dist[i] = np.inf
        visited[i] = False
        pred[i] = -1
    dist[dest] = 0.0
    load[dest] = tx
    size = _heap_push(heap_key, heap_node, 0, 0.0, dest)
    while size > 0:
        key, v, size = _heap_pop(heap_key, heap_node, size)
        if visited[v]:
            continue
        visited[v] = True
        if v == source:
            break
        lv = load[v]
        for i in range(indptr[v], indptr[v + 1]):
            u = nbr[i]
            if visited[u]:
                continue
            e = out_edge[i] ^ 1
            if cap[e >> 1] < lv:
                continue
            if u == source:
                nd = key
                nl = lv
            else:
                c_minus = edge_balance(fwd, cap, e)
                f = fee_value(code, params, c_minus, cap[e >> 1] - c_minus,
                              edge_reference(cap, ref, e), lv)
                nd = key + f
                nl = lv + f
            if nd < dist[u]:
                dist[u] = nd
                load[u] = nl
                pred[u] = e
                size = _heap_push(heap_key, heap_node, size, nd, u)
    if not visited[source]:
        return -1
    length = 0
    u = source
    while u != dest:
        e = pred[u]
        path_edges[length] = e
        length += 1
        u = _edge_head(indptr, nbr, out_edge, u, e)
    finish_path(code, params, fwd, cap, ref, path_edges, length, tx, path_fees, path_loads)
    return length


@numba.njit(cache=True, inline="always")
def _edge_head(indptr, nbr, out_edge, u, e):
    for i in range(indptr[u], indptr[u + 1]):
        if out_edge[i] == e:
            return nbr[i]
    return -1


@numba.njit(cache=True)
def cheapest_step(indptr, nbr, out_edge, fwd, cap, ref, code, params, source, dest, tx,
                  dist, load, pred, visited, heap_key, heap_node, path_edges, path_loads,
                  path_fees, saved):
    """Route and commit one payment via the source router.

    Returns ``(outcome, fee, messages, paths)`` like :func:`multipath_step`.
    """
    length = cheapest_path(indptr, nbr, out_edge, fwd, cap, ref, code, params, source, dest,
                           tx, dist, load, pred, visited, heap_key, heap_node, path_edges,
                           path_loads, path_fees)
    if length < 0:
        return 1, 0.0, 0, 0
    bad = apply_hops(fwd, cap, path_edges, path_loads, length, saved)
    if bad >= 0:
        return 2, 0.0, bad, 0
    total = 0.0
    for j in range(length):
        total += path_fees[j]
    return 0, total, length, 1
