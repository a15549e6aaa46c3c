import math
from fractions import Fraction

import numpy as np
import pytest

import hgi_policy.simulate as sim
from hgi_policy.fixtures import BUILTIN
from hgi_policy.network import scaled_params
from hgi_policy.policy import PolicyParams
from hgi_policy.ranking import find_viable_ranking
from hgi_policy.simulate import (
    SimulationInvariantError, batch_means, diffusion_scaled, idleness_constant, simulate,
    simulate_replications,
)


@pytest.fixture
def net_b():
    spec = BUILTIN["NET-B-HT"]()
    return spec, find_viable_ranking(spec)


@pytest.fixture
def mm1():
    return BUILTIN["MM1"](), ()


def test_zero_horizon(net_b):
    spec, rk = net_b
    q0 = [3, 0, 1, 0, 2, 0, 5]
    res = simulate(spec, rk, r=16, q0=q0, T=0.0)
    assert res.J_E == 0 and res.J_D == 0 and res.events == 0
    assert res.Q_final == tuple(q0)
    assert all(v == 0 for v in res.idleness + res.work_done + res.unused_capacity)


def test_deterministic(net_b):
    spec, rk = net_b
    a = simulate(spec, rk, r=8, T=2.0, seed=5, rep=1)
    b = simulate(spec, rk, r=8, T=2.0, seed=5, rep=1)
    a.wallclock_s = b.wallclock_s = 0.0
    assert a == b
    c = simulate(spec, rk, r=8, T=2.0, seed=5, rep=2)
    assert c.J_E != a.J_E


def test_invariants_hold_along_path(net_b):
    spec, rk = net_b
    res = simulate(spec, rk, r=12, T=3.0, seed=1, q0=[20, 0, 0, 40, 0, 10, 0],
                   check_invariants=True)
    assert res.events > 1000
    Q = np.array(res.Q_final)
    assert np.all(Q == np.array([20, 0, 0, 40, 0, 10, 0]) + np.array(res.arrivals) - np.array(res.completions))
    horizon = 144 * 3.0
    for i in range(spec.I):
        used = sum(res.work_done[j] for j in range(spec.J) if spec.K[i][j])
        assert res.unused_capacity[i] >= 0
        assert math.isclose(horizon * float(spec.C[i]) - used, res.unused_capacity[i], abs_tol=1e-6)


def test_completion_from_empty_queue_aborts(mm1, monkeypatch):
    spec, rk = mm1
    # with no lower threshold an empty queue keeps its service rate
    monkeypatch.setattr(sim, "integer_thresholds", lambda params, r: (0, 1))
    with pytest.raises(SimulationInvariantError):
        simulate(spec, rk, r=4, T=50.0, seed=0)


def test_event_rate(mm1):
    spec, rk = mm1
    r = 16
    res = simulate(spec, rk, r=r, T=40.0, seed=3)
    sp = scaled_params(spec, r)
    expected = sum(float(l + m * p) for l, m, p in zip(sp.lam_r, sp.mu_r, spec.rho))
    assert abs(res.events / (r * r * 40.0) / expected - 1) < 0.05


def test_discounted_cost_bounds(mm1):
    spec, rk = mm1
    res = simulate(spec, rk, r=8, T=30.0, theta=1.0, seed=2)
    assert 0 < res.J_D < 10
    assert res.J_D_tail >= 0
    assert res.J_E >= 0


def test_diffusion_scaled():
    spec = BUILTIN["NET-B-HT"]()
    Qh, Wh, Wt, th = diffusion_scaled(spec, [7, 0, 0, 0, 0, 0, 0], 7, t=98.0)
    assert np.array_equal(Qh, np.eye(7)[0])
    mu_r = float(scaled_params(spec, 7).mu_r[0])
    assert np.allclose(Wh, np.array([1, 0, 0, 0]) / mu_r)
    assert th == 2.0
    Qh, Wh, Wt, _ = diffusion_scaled(spec, [0] * 7, 5)
    assert not Qh.any() and not Wh.any() and not Wt.any()
    q = [1, 2, 3, 4, 5, 6, 7]
    assert np.array_equal(diffusion_scaled(spec, q, 1)[0], np.array(q, dtype=float))


def test_idleness_diagnostic_zero_cases(mm1):
    spec, rk = mm1
    assert simulate(spec, rk, r=8, T=0.0).idleness == (0.0,)
    # one resource: idling only happens below the stocking level, which is
    # below c3 r^alpha, so the indicator never fires
    assert idleness_constant(spec, PolicyParams()) == 4.0
    assert simulate(spec, rk, r=8, T=20.0, seed=1).idleness == (0.0,)


def test_gap_tracking(mm1, net_b):
    spec, rk = mm1
    res = simulate(spec, rk, r=8, T=5.0, seed=1, track_gap=True)
    assert abs(res.avg_holding - res.avg_workload_cost) < 1e-12
    spec, rk = net_b
    res = simulate(spec, rk, r=8, T=2.0, seed=1, track_gap=True)
    assert res.avg_holding - res.avg_workload_cost >= -1e-12


def test_trajectory_thinning(net_b):
    spec, rk = net_b
    res = simulate(spec, rk, r=8, T=1.0, seed=1, record_interval=0.1)
    t, Q = res.trajectory
    assert len(t) == 11 and Q.shape == (11, spec.J)
    assert np.allclose(t, np.arange(11) * 0.1)
    plain = simulate(spec, rk, r=8, T=1.0, seed=1)
    assert plain.J_E == res.J_E


def test_replications_merge_in_order(net_b):
    spec, rk = net_b
    seq = simulate_replications(spec, rk, r=6, T=1.0, reps=3, seed=4, workers=1)
    par = simulate_replications(spec, rk, r=6, T=1.0, reps=3, seed=4, workers=2)
    assert [x.J_E for x in seq.replications] == [x.J_E for x in par.replications]
    assert [x.rep for x in par.replications] == [0, 1, 2]
    assert seq.events == sum(x.events for x in seq.replications)
    assert seq.J_E_stderr > 0


def test_worker_env(monkeypatch):
    monkeypatch.setenv(sim.WORKERS_ENV, "3")
    assert sim.worker_count() == 3


def test_replication_streams_are_independent(mm1):
    spec, rk = mm1
    vals = [simulate(spec, rk, r=4, T=20.0, seed=9, rep=k).J_E for k in range(40)]
    v = np.array(vals)
    lag = np.corrcoef(v[:-1], v[1:])[0, 1]
    assert abs(lag) < 0.45
    # batch means over the replication sequence agree with the plain standard error
    mean, se = batch_means(v, n_batches=8)
    assert math.isclose(mean, v.mean())
    assert 0.3 < se / (v.std(ddof=1) / math.sqrt(len(v))) < 3.0


def test_batch_means_errors():
    with pytest.raises(ValueError):
        batch_means([1.0, 2.0], n_batches=5)


def test_bad_initial_queue(mm1):
    spec, rk = mm1
    with pytest.raises(ValueError):
        simulate(spec, rk, r=4, T=1.0, q0=[-1])


@pytest.mark.parametrize("r,c1,c2", [(4, 1.0, 2.0), (8, 1.0, 2.0), (8, 0.25, 0.5)])
def test_long_run_cost_matches_exact_chain(mm1, r, c1, c2):
    from oracles import mm1_stationary_cost
    spec, rk = mm1
    params = PolicyParams(0.4, c1, c2)
    exact = mm1_stationary_cost(r, 0.4, c1, c2)
    rep = simulate_replications(spec, rk, params, r=r, T=300.0, reps=12, seed=11, workers=1)
    assert abs(rep.J_E - exact) < 3.5 * rep.J_E_stderr
