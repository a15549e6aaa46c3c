import random
from fractions import Fraction

import pytest

from hgi_policy.fixtures import BUILTIN
from hgi_policy.network import scaled_params
from hgi_policy.policy import (
    ControlState, PolicyParams, ThresholdPolicy, initial_flags, integer_thresholds,
    policy_delta, rate_vector, stocked_sets, thresholds, update_hysteresis,
)
from hgi_policy.ranking import find_viable_ranking
from hgi_policy.workload import classify
from policy_checks import run_property_suite


@pytest.fixture
def net_b():
    spec = BUILTIN["NET-B-HT"]()
    return spec, find_viable_ranking(spec)


def test_params_validation():
    PolicyParams()
    assert (PolicyParams().alpha, PolicyParams().c1, PolicyParams().c2) == (0.4, 1.0, 2.0)
    for bad in [dict(alpha=0.5), dict(alpha=0), dict(c1=2, c2=2), dict(c1=0)]:
        with pytest.raises(ValueError):
            PolicyParams(**bad)


def test_stocked_sets(net_b):
    spec, _ = net_b
    params = PolicyParams(alpha=0.25, c2=2)
    zero = ControlState((0,) * 7, (1,) * 7, 16)
    assert stocked_sets(spec, zero, params) == (frozenset(), frozenset())
    one = ControlState((5,) + (0,) * 6, (0,) * 7, 16)
    assert stocked_sets(spec, one, params) == (frozenset({0}), frozenset({0}))
    full = ControlState((4,) * 7, (0,) * 7, 16)
    assert stocked_sets(spec, full, params) == (frozenset(range(7)), frozenset(range(4)))


def test_all_stocked_example(net_b):
    spec, rk = net_b
    d = policy_delta(spec)
    assert d == Fraction(1, 14)
    state = ControlState((10**6,) * 7, (0,) * 7, 16)
    x = rate_vector(spec, rk, classify(spec), state, PolicyParams())
    j = spec.job_index
    assert x[j("x1234")] == 1 - d / 16
    assert x[j("x12")] == 1 - d / 8
    assert x[j("x23")] == 1 - d / 4
    assert x[j("x1")] == 1 + 3 * d / 16
    assert spec.matvec(x) == spec.C


def test_only_first_single_stocked(net_b):
    spec, rk = net_b
    d = policy_delta(spec)
    state = ControlState((100,) + (0,) * 6, (0,) + (1,) * 6, 16)
    policy = ThresholdPolicy(spec, rk)
    y, x, sigma, varpi = policy.allocation(state)
    assert y[spec.job_index("x1234")] == 1 - d / 64
    assert y[spec.job_index("x12")] == 1 - d / 128
    assert x[0] == 1 + 3 * d / 128
    assert all(v == 0 for v in x[1:])


def test_gating_all_flags_raised(net_b):
    spec, rk = net_b
    x = ThresholdPolicy(spec, rk).rates(ControlState((100,) * 7, (1,) * 7, 16))
    assert all(v == 0 for v in x)


def test_hysteresis_rules():
    params = PolicyParams(alpha=0.25, c1=2, c2=4)   # r=16: band [4, 8)
    s = lambda q, e: ControlState((q,), (e,), 16)
    assert thresholds(params, 16) == (4.0, 8.0)
    assert update_hysteresis(s(3, 0), params, 0) == 1
    assert update_hysteresis(s(4, 0), params, 0) == 0
    assert update_hysteresis(s(8, 1), params, 0) == 0
    assert update_hysteresis(s(7, 1), params, 0) == 1
    assert update_hysteresis(s(5, 0), params, 0) == 0
    assert initial_flags([0, 4, 9], params, 16) == (1, 0, 0)
    assert integer_thresholds(params, 16) == (4, 8)
    lo, hi = integer_thresholds(PolicyParams(), 32)
    flo, fhi = thresholds(PolicyParams(), 32)
    for q in range(0, 40):
        assert (q < lo) == (q < flo) and (q >= hi) == (q >= fhi)


def test_ranking_must_match_multis(net_b):
    spec, _ = net_b
    with pytest.raises(ValueError):
        ThresholdPolicy(spec, ())


def test_r_hat_closeness(net_b):
    spec, rk = net_b
    p = ThresholdPolicy(spec, rk)
    assert p.r_hat() == 401408
    sp = scaled_params(spec, p.r_hat())
    bound = p.delta / (2 ** (2 * p.m + 6) * spec.J)
    assert all(abs(a - b) <= bound for a, b in zip(spec.rho, sp.rho_r))


def test_float_allocation_matches_exact(net_b):
    spec, rk = net_b
    p = ThresholdPolicy(spec, rk)
    for mask in range(1 << spec.J):
        assert p.nominal(mask, exact=False) == tuple(float(v) for v in p.nominal(mask))


@pytest.mark.parametrize("name", ["NET-A", "NET-B-HT", "NET-D", "NET-E", "MM1"])
def test_lemma_properties(name):
    spec = BUILTIN[name]()
    rk = find_viable_ranking(spec)
    chk = run_property_suite(spec, rk, PolicyParams(), 4000, seed=1)
    assert all(v == 0 for v in chk.violations.values()), chk.violations
    assert chk.checked["admissible"] > 0 and chk.checked["drift"] > 0


def test_pull_down_hypotheses_are_exercised():
    b = BUILTIN["NET-B-HT"]()
    chk = run_property_suite(b, find_viable_ranking(b), PolicyParams(), 4000, seed=2)
    assert chk.checked["pull_a"] > 50
    a = BUILTIN["NET-A"]()
    chk = run_property_suite(a, find_viable_ranking(a), PolicyParams(), 4000, seed=2)
    assert chk.checked["pull_b"] > 50


def test_drift_can_fail_below_closeness_radius(net_b):
    # at r = 64 the arrival deficit beta*/r dwarfs the smallest cut, so an
    # in-band ranked job under case 3 drains faster than it fills
    spec, rk = net_b
    r = 64
    p = ThresholdPolicy(spec, rk)
    lo, hi = integer_thresholds(p.params, r)
    Q = [0] * spec.J
    Q[spec.job_index("x23")] = lo
    E = [1] * spec.J
    E[spec.job_index("x23")] = 0
    x = p.rates(ControlState(tuple(Q), tuple(E), r))
    sp = scaled_params(spec, r)
    j = spec.job_index("x23")
    assert sp.lam_r[j] - sp.mu_r[j] * x[j] < 0
