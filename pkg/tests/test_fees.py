import math

import pytest
from hypothesis import assume, given, settings, strategies as st

from pcnsim.fees import (FeeDomainError, FeeInput, FeePolicy, fee_distasi, fee_lightning,
                         fee_merchant_v1, fee_merchant_v2, path_fees, total_fee)
from pcnsim.routing import CandidatePath, RoutePlan

LN = FeePolicy("lightning")
DS = FeePolicy("distasi")
V1 = FeePolicy("merchant_v1")
V2 = FeePolicy("merchant_v2")

TOL = 1e-9


@pytest.mark.parametrize("x, expected", [(0, 1.0), (100, 1.0001), (1_200_000, 2.2)])
def test_lightning_values(x, expected):
    assert fee_lightning(LN, x) == pytest.approx(expected, rel=1e-12)


def test_distasi_values():
    # half capacity 100: 50 at the low rate, 50 at the high rate
    assert fee_distasi(DS, FeeInput(150, 50, 100, 100)) == pytest.approx(3.0)
    # already below half: everything at the high rate
    assert fee_distasi(DS, FeeInput(80, 120, 100, 50)) == pytest.approx(2.5)
    assert fee_distasi(DS, FeeInput(80, 120, 100, 0)) == 1.0
    # stays above half: everything at the low rate
    assert fee_distasi(DS, FeeInput(180, 20, 100, 50)) == pytest.approx(1.5)


def test_merchant_v1_values():
    assert fee_merchant_v1(V1, FeeInput(200, 0, 100, 100)) == pytest.approx(0.5)
    assert fee_merchant_v1(V1, FeeInput(200, 0, 100, 200)) == pytest.approx(1.0)
    assert fee_merchant_v1(V1, FeeInput(37, 91, 12, 0)) == 1.0


def test_merchant_v2_values():
    assert fee_merchant_v2(V2, FeeInput(200, 0, 100, 100)) == 0.0
    assert fee_merchant_v2(V2, FeeInput(100, 100, 100, 50)) == pytest.approx(0.25)
    assert fee_merchant_v2(V2, FeeInput(37, 91, 12, 0)) == 0.0


def test_factor_scales_merchant_fees():
    v1 = FeePolicy("merchant_v1", factor=3.0)
    assert fee_merchant_v1(v1, FeeInput(200, 0, 100, 100)) == pytest.approx(1.5)


@pytest.mark.parametrize("bad", [
    FeeInput(10, 10, 10, 11),   # x > c_minus
    FeeInput(0, 0, 0, 0),       # no capacity
    FeeInput(10, 10, 21, 1),    # ref beyond capacity
    FeeInput(10, -1, 5, 1),
])
@pytest.mark.parametrize("fn, policy", [(fee_distasi, DS), (fee_merchant_v1, V1), (fee_merchant_v2, V2)])
def test_domain_errors(fn, policy, bad):
    with pytest.raises(FeeDomainError):
        fn(policy, bad)


def test_policy_validation():
    with pytest.raises(ValueError):
        FeePolicy("distasi", rate_low=0.03, rate_high=0.01)
    with pytest.raises(ValueError):
        FeePolicy("merchant_v1", factor=0)
    with pytest.raises(ValueError):
        FeePolicy("nope")
    with pytest.raises(ValueError):
        FeePolicy(base_fee=-1)


def test_path_fees_single_hop_is_free():
    for policy in (LN, DS, V1, V2):
        pf = path_fees(policy, [(500, 500, 250)], 100)
        assert pf.total == 0
        assert pf.loads == [100]


def test_path_fees_three_hop_lightning():
    pf = path_fees(LN, [(1e9, 0, 0)] * 3, 100)
    assert pf.fees[2] == pytest.approx(1.0001, rel=1e-12)
    assert pf.fees[1] == pytest.approx(1 + 101.0001e-6, rel=1e-12)
    assert pf.total == pytest.approx(2.0002010001, rel=1e-12)
    assert pf.loads == pytest.approx([102.0002010001, 101.0001, 100], rel=1e-12)


def test_path_fees_v2_improving_hop():
    # second hop moves 200 -> 150 towards ref 100: free
    pf = path_fees(V2, [(300, 300, 300), (200, 0, 100)], 50)
    assert pf.total == 0
    assert pf.loads[0] == 50


def test_total_fee_sums_paths():
    def path(fees):
        return CandidatePath(0, [], [], [], [0.0] + fees, sum(fees))
    plan = RoutePlan(10, [path([2.0002]), path([0.25, 0.25])], 2, 2, 0.0, 0)
    assert total_fee(plan) == pytest.approx(2.5002)
    assert total_fee(RoutePlan(10, [path([])], 1, 1, 0.0, 0)) == 0


# ---------------------------------------------------------------------------
# properties

@st.composite
def channel_state(draw):
    scale = draw(st.sampled_from([1e-3, 1.0, 1e3, 2.4e6, 1e8]))
    c_minus = draw(st.floats(0, 1)) * scale
    c_plus = draw(st.floats(0, 1)) * scale
    assume(c_minus + c_plus > 0)
    ref = draw(st.floats(0, 1)) * (c_minus + c_plus)
    return c_minus, c_plus, min(ref, c_minus + c_plus)


merchant = st.sampled_from([V1, V2])
all_policies = st.sampled_from([LN, DS, V1, V2])


@settings(max_examples=500)
@given(merchant, channel_state(), st.floats(0, 1), st.floats(0, 1))
def test_fee_non_decreasing_in_distance(policy, state, a, b):
    c_minus, c_plus, ref = state
    x1, x2 = a * c_minus, b * c_minus
    f1, f2 = policy.fee(c_minus, c_plus, ref, x1), policy.fee(c_minus, c_plus, ref, x2)
    d1, d2 = abs(c_minus - x1 - ref), abs(c_minus - x2 - ref)
    if f1 < f2 - TOL:
        assert d1 <= d2 + TOL
    if d1 < d2:
        assert f1 <= f2 + TOL


@settings(max_examples=500)
@given(merchant, channel_state(), st.floats(0, 1), st.floats(0, 1))
def test_fee_subadditive(policy, state, a, b):
    c_minus, c_plus, ref = state
    x1 = a * c_minus
    x2 = b * (c_minus - x1)
    assume(x1 + x2 <= c_minus)

    def then(first, second):
        # shifted state can round a hair outside the input set
        lo, hi = c_minus - first, c_plus + first
        return (policy.fee(c_minus, c_plus, ref, first)
                + policy.fee(lo, hi, min(ref, lo + hi), min(second, lo)))

    whole = policy.fee(c_minus, c_plus, ref, x1 + x2)
    assert then(x1, x2) >= whole - TOL
    assert then(x2, x1) >= whole - TOL


@settings(max_examples=500)
@given(merchant, channel_state(), st.floats(0, 1), st.floats(0, 1))
def test_fee_lipschitz(policy, state, a, b):
    c_minus, c_plus, ref = state
    x, y = sorted((a * c_minus, b * c_minus))
    diff = abs(policy.fee(c_minus, c_plus, ref, x) - policy.fee(c_minus, c_plus, ref, y))
    assert diff <= policy.factor * (y - x) / (c_minus + c_plus) + TOL


@settings(max_examples=500)
@given(all_policies, channel_state(), st.floats(0, 1))
def test_fee_non_negative(policy, state, a):
    c_minus, c_plus, ref = state
    assert policy.fee(c_minus, c_plus, ref, a * c_minus) >= 0


@settings(max_examples=500)
@given(channel_state(), st.floats(0, 1))
def test_v2_never_exceeds_v1(state, a):
    c_minus, c_plus, ref = state
    x = a * c_minus
    assert V2.fee(c_minus, c_plus, ref, x) <= V1.fee(c_minus, c_plus, ref, x) + TOL


@given(st.floats(0, 1e9, allow_nan=False))
def test_lightning_ignores_balances(x):
    assert LN.fee(1, 2, 0.5, x) == LN.fee(1e9, 0, 0, x) == pytest.approx(1 + 1e-6 * x)
    assert math.isfinite(LN.fee(1, 2, 0.5, x))
