"""Fee policies for channel forwarding.

Four policies are supported:

* ``lightning``    -- constant base fee plus a proportional rate.
* ``distasi``      -- two-rate scheme; the part of the value that pushes the
                      sender's balance below half the capacity pays the higher rate.
* ``merchant_v1``  -- factor ``F`` scaled by the change in distance to the
                      reference point, normalised by total capacity.
* ``merchant_v2``  -- like v1 but balance-improving forwards are free.

Every policy is evaluated on the four-tuple ``(c_minus, c_plus, ref, x)``:
balance in payment direction, balance in reverse direction, reference point
and value forwarded. The numba kernels at the bottom are what the router and
simulator call; the public ``fee_*`` functions validate their inputs first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

LIGHTNING = 0
DISTASI = 1
MERCHANT_V1 = 2
MERCHANT_V2 = 3

POLICY_CODES = {
    "lightning": LIGHTNING,
    "distasi": DISTASI,
    "merchant_v1": MERCHANT_V1,
    "merchant_v2": MERCHANT_V2,
}

# index layout of FeePolicy.params
P_BASE, P_RATE, P_RATE_LOW, P_RATE_HIGH, P_FACTOR = range(5)


class FeeDomainError(ValueError):
    """Raised when a fee input lies outside the admissible input set."""


@dataclass(frozen=True)
class FeeInput:
    c_minus: float
    c_plus: float
    ref: float
    x: float

    def check(self) -> None:
        c_minus, c_plus, ref, x = self.c_minus, self.c_plus, self.ref, self.x
        if min(c_minus, c_plus, ref, x) < 0:
            raise FeeDomainError(f"negative component in {self}")
        total = c_minus + c_plus
        if not total > 0:
            raise FeeDomainError(f"channel has no capacity: {self}")
        if x > c_minus:
            raise FeeDomainError(f"value {x} exceeds balance {c_minus}")
        if ref > total:
            raise FeeDomainError(f"reference point {ref} exceeds capacity {total}")

    def in_domain(self) -> bool:
        try:
            self.check()
        except FeeDomainError:
            return False
        return True


@dataclass(frozen=True)
class FeePolicy:
    """A fee policy and its parameters.

    Defaults: ``base_fee=1``, ``rate=1e-6`` (Lightning), ``rate_low=0.01``,
    ``rate_high=0.03`` (di Stasi), ``factor=1`` (Merchant).
    """

    kind: str = "lightning"
    base_fee: float = 1.0
    rate: float = 1e-6
    rate_low: float = 0.01
    rate_high: float = 0.03
    factor: float = 1.0
    params: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in POLICY_CODES:
            raise ValueError(f"unknown fee policy {self.kind!r}; choose from {sorted(POLICY_CODES)}")
        if min(self.base_fee, self.rate, self.rate_low, self.rate_high) < 0:
            raise ValueError("fee parameters must be non-negative")
        if self.kind == "distasi" and not self.rate_high > self.rate_low:
            raise ValueError("distasi requires rate_high > rate_low")
        if self.kind.startswith("merchant") and not self.factor > 0:
            raise ValueError("merchant factor must be positive")
        params = np.array(
            [self.base_fee, self.rate, self.rate_low, self.rate_high, self.factor],
            dtype=np.float64,
        )
        params.setflags(write=False)
        object.__setattr__(self, "params", params)

    @property
    def code(self) -> int:
        return POLICY_CODES[self.kind]

    def fee(self, c_minus: float, c_plus: float, ref: float, x: float) -> float:
        """Fee for forwarding ``x`` over a channel in the given state."""
        if self.kind == "lightning":
            return fee_lightning(self, x)
        return _DISPATCH[self.kind](self, FeeInput(c_minus, c_plus, ref, x))


def fee_lightning(policy: FeePolicy, x: float) -> float:
    if x < 0:
        raise FeeDomainError(f"negative value {x}")
    return float(_lightning(x, policy.base_fee, policy.rate))


def fee_distasi(policy: FeePolicy, inp: FeeInput) -> float:
    inp.check()
    return float(_distasi(inp.c_minus, inp.c_plus, inp.x,
                          policy.base_fee, policy.rate_low, policy.rate_high))


def fee_merchant_v1(policy: FeePolicy, inp: FeeInput) -> float:
    inp.check()
    return float(_merchant_v1(inp.c_minus, inp.c_plus, inp.ref, inp.x, policy.factor))


def fee_merchant_v2(policy: FeePolicy, inp: FeeInput) -> float:
    inp.check()
    return float(_merchant_v2(inp.c_minus, inp.c_plus, inp.ref, inp.x, policy.factor))


_DISPATCH = {
    "distasi": fee_distasi,
    "merchant_v1": fee_merchant_v1,
    "merchant_v2": fee_merchant_v2,
}


@dataclass
class PathFees:
    """Per-hop fees and loads for one path.

    ``fees[j]`` is charged on hop ``j`` (``fees[0]`` is always 0, the sender
    owns the first channel); ``loads[j]`` is the value hop ``j`` must carry.
    """

    fees: list[float]
    loads: list[float]

    @property
    def total(self) -> float:
        return float(sum(self.fees))


def path_fees(policy: FeePolicy, hops: Sequence[tuple[float, float, float]], tx: float) -> PathFees:
    """Backward fee recursion along a path.

    ``hops`` holds ``(c_minus, c_plus, ref)`` for each channel in payment order.
    No balance feasibility is checked here.
    """
    if len(hops) < 1:
        raise ValueError("path needs at least one hop")
    if not tx > 0:
        raise ValueError("transaction value must be positive")
    state = np.asarray(hops, dtype=np.float64).reshape(-1, 3)
    n = state.shape[0]
    fees = np.zeros(n)
    loads = np.zeros(n)
    _path_fees(policy.code, policy.params, state[:, 0].copy(), state[:, 1].copy(),
               state[:, 2].copy(), n, tx, fees, loads)
    return PathFees(fees.tolist(), loads.tolist())


def total_fee(plan) -> float:
    """Sum of all per-hop fees over the paths of a route plan."""
    return float(sum(sum(p.per_hop_fees[1:]) for p in plan.selected))


# ---------------------------------------------------------------------------
# numba kernels (no domain checks)


@numba.njit(cache=True)
def _lightning(x, base, rate):
    return base + rate * x


@numba.njit(cache=True)
def _distasi(c_minus, c_plus, x, base, rate_low, rate_high):
    half = 0.5 * (c_minus + c_plus)
    if c_minus < half:
        low = 0.0
    elif c_minus - x >= half:
        low = x
    else:
        low = c_minus - half
    return base + low * rate_low + (x - low) * rate_high


@numba.njit(cache=True)
def _merchant_v1(c_minus, c_plus, ref, x, factor):
    delta = abs(c_minus - x - ref) - abs(c_minus - ref)
    return (1.0 + delta / (c_minus + c_plus)) * factor


@numba.njit(cache=True)
def _merchant_v2(c_minus, c_plus, ref, x, factor):
    after = abs(c_minus - x - ref)
    before = abs(c_minus - ref)
    if after <= before:
        return 0.0
    return (after - before) / (c_minus + c_plus) * factor


@numba.njit(cache=True)
def fee_value(code, params, c_minus, c_plus, ref, x):
    if code == LIGHTNING:
        return _lightning(x, params[P_BASE], params[P_RATE])
    if code == DISTASI:
        return _distasi(c_minus, c_plus, x, params[P_BASE], params[P_RATE_LOW], params[P_RATE_HIGH])
    if code == MERCHANT_V1:
        return _merchant_v1(c_minus, c_plus, ref, x, params[P_FACTOR])
    return _merchant_v2(c_minus, c_plus, ref, x, params[P_FACTOR])


@numba.njit(cache=True)
def _path_fees(code, params, c_minus, c_plus, ref, n, tx, fees, loads):
    load = tx
    for j in range(n - 1, 0, -1):
        loads[j] = load
        f = fee_value(code, params, c_minus[j], c_plus[j], ref[j], load)
        fees[j] = f
        load += f
    loads[0] = load
    fees[0] = 0.0
    return load
