"""Payment channel network state.

Each undirected channel ``c`` joins ``ch_a[c] < ch_b[c]`` and is stored as a
forward balance (``a -> b``) plus its fixed total capacity; the reverse
balance is always ``cap - fwd``, so per-channel capacity is conserved by
construction. Directed edges are numbered ``2c`` (a -> b) and ``2c + 1``
(b -> a); ``e ^ 1`` is the reverse of ``e``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Iterable

import numba
import numpy as np


class MissingChannelError(KeyError):
    pass


class InsufficientBalanceError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelState:
    balance_fwd: float
    balance_rev: float
    reference_point: float

    @property
    def capacity(self) -> float:
        return self.balance_fwd + self.balance_rev


@dataclass(frozen=True)
class PaymentResult:
    success: bool
    failed_hop: tuple[int, int] | None = None
    failed_index: int = -1

    def __bool__(self) -> bool:
        return self.success


class PaymentNetwork:
    """Directed-balance channel graph over nodes ``0..n_nodes-1``.

    ``channels`` yields ``(u, v, balance_uv, balance_vu)`` or
    ``(u, v, balance_uv, balance_vu, ref_uv)``; the reference point defaults to
    half the total capacity and is stored from ``u``'s side.
    """

    def __init__(self, n_nodes: int, channels: Iterable[tuple]):
        rows = []
        seen = set()
        for ch in channels:
            u, v, b_uv, b_vu = int(ch[0]), int(ch[1]), float(ch[2]), float(ch[3])
            ref_uv = float(ch[4]) if len(ch) > 4 else None
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (0 <= u < n_nodes and 0 <= v < n_nodes):
                raise ValueError(f"channel ({u}, {v}) outside node range 0..{n_nodes - 1}")
            if b_uv < 0 or b_vu < 0 or not b_uv + b_vu > 0:
                raise ValueError(f"invalid balances on channel ({u}, {v}): {b_uv}, {b_vu}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate channel {key}")
            seen.add(key)
            cap = b_uv + b_vu
            if ref_uv is None:
                ref_uv = cap / 2
            if not 0 <= ref_uv <= cap:
                raise ValueError(f"reference point {ref_uv} outside [0, {cap}]")
            if u > v:
                u, v, b_uv, ref_uv = v, u, b_vu, cap - ref_uv
            rows.append((u, v, b_uv, cap, ref_uv))

        self.n_nodes = int(n_nodes)
        m = len(rows)
        self.ch_a = np.array([r[0] for r in rows], dtype=np.int64)
        self.ch_b = np.array([r[1] for r in rows], dtype=np.int64)
        self.fwd = np.array([r[2] for r in rows], dtype=np.float64)
        self.cap = np.array([r[3] for r in rows], dtype=np.float64)
        self.ref = np.array([r[4] for r in rows], dtype=np.float64)
        self._edge_id = {}
        for c in range(m):
            a, b = int(self.ch_a[c]), int(self.ch_b[c])
            self._edge_id[(a, b)] = 2 * c
            self._edge_id[(b, a)] = 2 * c + 1
        self._build_adjacency()

    def _build_adjacency(self):
        m = len(self.ch_a)
        src = np.concatenate([self.ch_a, self.ch_b])
        dst = np.concatenate([self.ch_b, self.ch_a])
        eid = np.concatenate([2 * np.arange(m), 2 * np.arange(m) + 1]).astype(np.int64)
        order = np.lexsort((dst, src))
        self.nbr = dst[order].astype(np.int64)
        self.out_edge = eid[order]
        counts = np.bincount(src, minlength=self.n_nodes) if m else np.zeros(self.n_nodes, np.int64)
        self.indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
        np.cumsum(counts, out=self.indptr[1:])

    # -- queries ---------------------------------------------------------

    @property
    def n_channels(self) -> int:
        return len(self.ch_a)

    def edge_id(self, u: int, v: int) -> int:
        try:
            return self._edge_id[(u, v)]
        except KeyError:
            raise MissingChannelError(f"no channel between {u} and {v}") from None

    def edge_nodes(self, e: int) -> tuple[int, int]:
        c = e >> 1
        a, b = int(self.ch_a[c]), int(self.ch_b[c])
        return (a, b) if e & 1 == 0 else (b, a)

    def has_channel(self, u: int, v: int) -> bool:
        return (u, v) in self._edge_id

    def balance(self, u: int, v: int) -> float:
        return float(edge_balance(self.fwd, self.cap, self.edge_id(u, v)))

    def reference(self, u: int, v: int) -> float:
        """Reference point seen from ``u``'s side of the channel."""
        return float(edge_reference(self.cap, self.ref, self.edge_id(u, v)))

    def channel(self, u: int, v: int) -> ChannelState:
        return ChannelState(self.balance(u, v), self.balance(v, u), self.reference(u, v))

    def neighbors(self, u: int) -> list[int]:
        return self.nbr[self.indptr[u]:self.indptr[u + 1]].tolist()

    def degree(self, u: int) -> int:
        return int(self.indptr[u + 1] - self.indptr[u])

    def channels(self) -> list[tuple[int, int]]:
        return list(zip(self.ch_a.tolist(), self.ch_b.tolist()))

    def total_capacity(self) -> float:
        """Sum of all directed balances, computed exactly."""
        return math.fsum(self.fwd.tolist()) + math.fsum((self.cap - self.fwd).tolist())

    def state_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.fwd.tobytes())
        h.update(self.cap.tobytes())
        h.update(self.ref.tobytes())
        return h.hexdigest()

    def snapshot(self) -> np.ndarray:
        return self.fwd.copy()

    def restore(self, snapshot: np.ndarray) -> None:
        self.fwd[:] = snapshot

    def copy(self) -> "PaymentNetwork":
        other = object.__new__(PaymentNetwork)
        other.__dict__.update(self.__dict__)
        other.fwd = self.fwd.copy()
        return other

    # -- mutation --------------------------------------------------------

    def apply_transfer(self, u: int, v: int, amount: float) -> None:
        e = self.edge_id(u, v)
        if not amount > 0:
            raise ValueError(f"transfer amount must be positive, got {amount}")
        available = edge_balance(self.fwd, self.cap, e)
        if amount > available:
            raise InsufficientBalanceError(
                f"cannot move {amount} from {u} to {v}: balance {available}")
        _transfer(self.fwd, self.cap, e, amount)

    def __repr__(self) -> str:
        return f"PaymentNetwork(n_nodes={self.n_nodes}, n_channels={self.n_channels})"


def apply_payment(net: PaymentNetwork, plan) -> PaymentResult:
    """Commit every hop of every selected path, or nothing.

    Hops are applied path by path in order; an intermediary keeps the
    difference between what it receives and what it forwards. If any hop's
    load exceeds the balance at that moment the network is restored exactly.
    """
    edges, loads = [], []
    for path in plan.selected:
        edges.extend(path.edges)
        loads.extend(path.hop_loads)
    if not edges:
        return PaymentResult(True)
    edges_arr = np.asarray(edges, dtype=np.int64)
    loads_arr = np.asarray(loads, dtype=np.float64)
    saved = np.empty(len(edges), dtype=np.float64)
    bad = apply_hops(net.fwd, net.cap, edges_arr, loads_arr, len(edges), saved)
    if bad < 0:
        return PaymentResult(True)
    return PaymentResult(False, net.edge_nodes(int(edges_arr[bad])), int(bad))


# ---------------------------------------------------------------------------
# numba kernels


@numba.njit(cache=True, inline="always")
def edge_balance(fwd, cap, e):
    c = e >> 1
    if e & 1:
        return cap[c] - fwd[c]
    return fwd[c]


@numba.njit(cache=True, inline="always")
def edge_reference(cap, ref, e):
    c = e >> 1
    if e & 1:
        return cap[c] - ref[c]
    return ref[c]


@numba.njit(cache=True, inline="always")
def _transfer(fwd, cap, e, amount):
    c = e >> 1
    if e & 1:
        fwd[c] = min(fwd[c] + amount, cap[c])
    else:
        fwd[c] = max(fwd[c] - amount, 0.0)


@numba.njit(cache=True)
def apply_hops(fwd, cap, edges, loads, n, saved):
    """Apply ``n`` hop transfers in order; returns -1 or the failing index.

    On failure every touched channel is restored from ``saved``.
    """
    for i in range(n):
        e = edges[i]
        saved[i] = fwd[e >> 1]
        if loads[i] > edge_balance(fwd, cap, e):
            for j in range(i, -1, -1):
                fwd[edges[j] >> 1] = saved[j]
            return i
        _transfer(fwd, cap, e, loads[i])
    return -1
