"""Event-driven simulation of the network under the threshold policy.

Inter-arrival times and job sizes are exponential, so between jumps the
state is constant and the process is a continuous-time Markov chain.  Each
step draws one exponential holding time and one uniform to pick the event.
All time integrals (holding cost, discounted cost, idleness, processed
work) are accumulated exactly over the piecewise-constant segments.
"""
from __future__ import annotations

import math
import os
import time
from bisect import bisect_right
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import accumulate
from typing import Sequence

import numpy as np

from .network import NetworkSpec, as_fraction, scaled_params
from .policy import PolicyParams, ThresholdPolicy, integer_thresholds
from .workload import CostFunction

__all__ = [
    "SimulationInvariantError",
    "SimResult",
    "CostReport",
    "simulate",
    "simulate_replications",
    "diffusion_scaled",
    "idleness_constant",
    "replication_seed",
    "batch_means",
    "worker_count",
]

_SIM_STREAM = 1
_BUFFER = 4096
WORKERS_ENV = "HGI_POLICY_WORKERS"


class SimulationInvariantError(RuntimeError):
    """The simulated state left the region the policy guarantees."""


@dataclass
class SimResult:
    r: float
    rep: int
    seed: int
    T: float
    theta: float
    J_E: float
    J_D: float
    J_D_tail: float
    events: int
    idleness: tuple[float, ...]
    Q_final: tuple[int, ...]
    arrivals: tuple[int, ...]
    completions: tuple[int, ...]
    work_done: tuple[float, ...]
    unused_capacity: tuple[float, ...]
    avg_holding: float = 0.0           # time average of h.Q/r
    avg_workload_cost: float | None = None   # time average of C(KM Q/r)
    trajectory: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)
    wallclock_s: float = 0.0


@dataclass
class CostReport:
    r: float
    T: float
    theta: float
    replications: list[SimResult]
    hgi: dict | None = None

    def _col(self, name) -> np.ndarray:
        return np.array([getattr(rep, name) for rep in self.replications], dtype=float)

    @staticmethod
    def _stderr(v: np.ndarray) -> float:
        return float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else float("nan")

    @property
    def J_E(self) -> float:
        return float(self._col("J_E").mean())

    @property
    def J_E_stderr(self) -> float:
        return self._stderr(self._col("J_E"))

    @property
    def J_D(self) -> float:
        return float(self._col("J_D").mean())

    @property
    def J_D_stderr(self) -> float:
        return self._stderr(self._col("J_D"))

    @property
    def events(self) -> int:
        return sum(rep.events for rep in self.replications)

    @property
    def idleness(self) -> np.ndarray:
        return np.array([rep.idleness for rep in self.replications]).mean(axis=0)


def worker_count(default: int | None = None) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return default or os.cpu_count() or 1


def replication_seed(seed: int, r, rep: int, stream: int = _SIM_STREAM) -> np.random.SeedSequence:
    """Independent stream for one (subcommand, r, replication) triple."""
    r = as_fraction(r)
    return np.random.SeedSequence(seed, spawn_key=(stream, r.numerator, r.denominator, rep))


def idleness_constant(spec: NetworkSpec, params: PolicyParams) -> float:
    """Workload level 2 J c2 / min(mu) above which idling should be rare."""
    return 2 * spec.J * params.c2 / float(min(spec.mu))


def diffusion_scaled(spec: NetworkSpec, Q: Sequence, r, t: float | None = None):
    """Return ``(Q_hat, W_hat, W_tilde, t_hat)``.

    ``W_hat`` uses the r-th system's service rates, ``W_tilde`` the limiting
    ones; ``t_hat`` is ``t / r^2`` (None when ``t`` is not given).
    """
    r = as_fraction(r)
    Qh = np.asarray(Q, dtype=float) / float(r)
    # the embedding keeps mu^r = mu, so both workload maps share one matrix;
    # arrival rates play no part, hence no admissibility check on r
    Gr = G = np.array(spec.G(), dtype=float)
    t_hat = None if t is None else t / float(r) ** 2
    Wh = Gr @ Qh if Qh.ndim == 1 else Qh @ Gr.T
    Wt = G @ Qh if Qh.ndim == 1 else Qh @ G.T
    return Qh, Wh, Wt, t_hat


class _RateTable:
    """Per-run cache from (stocked mask, flag mask) to float rates.

    Idle rates are formed exactly before conversion so that full
    utilisation gives an idle rate of exactly zero.
    """

    def __init__(self, policy: ThresholdPolicy, mu_r):
        self.policy = policy
        spec = policy.spec
        self.mu_r = [Fraction(m) for m in mu_r]
        self.K = spec.K
        self.C = spec.C
        self.J = spec.J
        self.cache: dict[tuple[int, int], tuple] = {}

    def get(self, sigma: int, emask: int):
        key = (sigma, emask)
        hit = self.cache.get(key)
        if hit is None:
            y = self.policy.nominal(sigma, exact=True)
            x = [Fraction(0) if emask >> j & 1 else y[j] for j in range(self.J)]
            idle = [C - sum(x[j] for j in range(self.J) if row[j]) for C, row in zip(self.C, self.K)]
            if any(v < 0 for v in idle) or any(v < 0 for v in x):
                raise SimulationInvariantError("allocation violates capacity or sign constraints")
            comp = [float(self.mu_r[j] * x[j]) for j in range(self.J)]
            hit = (
                [float(v) for v in x],
                list(accumulate(comp)),
                [float(v) for v in idle],
            )
            self.cache[key] = hit
        return hit


def simulate(
    spec: NetworkSpec,
    ranking,
    params: PolicyParams | None = None,
    r=16,
    q0: Sequence[int] | None = None,
    T: float = 1.0,
    theta: float = 1.0,
    seed: int = 0,
    rep: int = 0,
    *,
    record_interval: float | None = None,
    track_gap: bool = False,
    check_invariants: bool = False,
    policy: ThresholdPolicy | None = None,
) -> SimResult:
    """Run one replication over diffusion-time horizon ``T`` (``r^2 T`` real time).

    ``record_interval`` (diffusion time) turns on a thinned trajectory of
    ``(t_hat, Q)`` samples.  ``track_gap`` also integrates the workload cost
    of the scaled state, which is needed for the holding-versus-workload
    cost gap.
    """
    wall0 = time.perf_counter()
    params = params or PolicyParams()
    policy = policy or ThresholdPolicy(spec, ranking, params)
    r_frac = as_fraction(r)
    rf = float(r_frac)
    sp = scaled_params(spec, r_frac)
    J, I = spec.J, spec.I
    lam = [float(v) for v in sp.lam_r]
    lam_cum = list(accumulate(lam))
    lam_total = lam_cum[-1]
    mu_r = [float(v) for v in sp.mu_r]
    h = [float(v) for v in spec.h]
    K = spec.K
    res_of = [[i for i in range(I) if K[i][j]] for j in range(J)]
    inv_mu = [1.0 / m for m in mu_r]

    lo_int, hi_int = integer_thresholds(params, r_frac)
    thr3 = idleness_constant(spec, params) * rf ** params.alpha

    Q = [0] * J if q0 is None else [int(v) for v in q0]
    if len(Q) != J or any(v < 0 for v in Q):
        raise ValueError("initial queue must be a nonnegative vector of length J")
    Q0 = list(Q)
    E = [1 if q < lo_int else 0 for q in Q]
    sigma = sum(1 << j for j in range(J) if Q[j] >= hi_int)
    emask = sum(1 << j for j in range(J) if E[j])
    W = [sum(Q[j] * inv_mu[j] for j in range(J) if K[i][j]) for i in range(I)]
    hQ = sum(hj * qj for hj, qj in zip(h, Q))

    table = _RateTable(policy, sp.mu_r)
    A = [0] * J
    S = [0] * J
    Bw = [0.0] * J
    Iu = [0.0] * I
    diag = [0.0] * I
    acc_hold = 0.0
    acc_disc = 0.0
    acc_cost = 0.0
    horizon = rf * rf * T
    disc_rate = theta / (rf * rf)

    cost_fn = None
    if track_gap:
        cost_fn = CostFunction(spec)
        verts = cost_fn.vertices.tolist()
        G_lim = [[K[i][j] / float(spec.mu[j]) for j in range(J)] for i in range(I)]

        def cost_now():
            wl = [sum(G_lim[i][j] * Q[j] for j in range(J)) for i in range(I)]
            return max(sum(p * w for p, w in zip(v, wl)) for v in verts)

        cur_cost = cost_now()

    rec_t: list[float] = []
    rec_q: list[list[int]] = []
    next_rec = 0.0 if record_interval else math.inf
    rec_step = (record_interval or 0.0) * rf * rf

    rng = np.random.default_rng(replication_seed(seed, r_frac, rep))
    expo: list[float] = []
    unif: list[float] = []
    pos = _BUFFER

    t = 0.0
    events = 0
    disc_now = 1.0
    x, comp_cum, idle = table.get(sigma, emask)
    while True:
        total = lam_total + comp_cum[-1]
        if pos >= _BUFFER:
            expo = rng.standard_exponential(_BUFFER).tolist()
            unif = rng.random(_BUFFER).tolist()
            pos = 0
        dt = expo[pos] / total
        u = unif[pos] * total
        pos += 1
        t_next = t + dt
        last = t_next >= horizon
        if last:
            t_next = horizon
            dt = horizon - t
        while next_rec <= t_next and next_rec <= horizon:
            rec_t.append(next_rec / (rf * rf))
            rec_q.append(list(Q))
            next_rec += rec_step
        # exact integrals over the constant segment [t, t_next)
        acc_hold += hQ * dt
        disc_next = math.exp(-disc_rate * t_next)
        acc_disc += hQ * (disc_now - disc_next) / disc_rate
        disc_now = disc_next
        for i in range(I):
            d = idle[i]
            if d:
                Iu[i] += d * dt
                if W[i] >= thr3:
                    diag[i] += d * dt
        for j in range(J):
            if x[j]:
                Bw[j] += x[j] * dt
        if cost_fn is not None:
            acc_cost += cur_cost * dt
        t = t_next
        if last:
            break
        events += 1
        if u < lam_total:
            j = bisect_right(lam_cum, u)
            if j >= J:
                j = J - 1
            Q[j] += 1
            A[j] += 1
            hQ += h[j]
            for i in res_of[j]:
                W[i] += inv_mu[j]
            q = Q[j]
            if q == hi_int:
                sigma |= 1 << j
                if E[j]:
                    E[j] = 0
                    emask &= ~(1 << j)
        else:
            j = bisect_right(comp_cum, u - lam_total)
            if j >= J:
                j = J - 1
            if Q[j] <= 0 or not x[j]:
                raise SimulationInvariantError(
                    f"completion drawn for job {spec.job_names[j]} with Q={Q[j]} x={x[j]}"
                )
            Q[j] -= 1
            S[j] += 1
            hQ -= h[j]
            for i in res_of[j]:
                W[i] -= inv_mu[j]
            q = Q[j]
            if q == hi_int - 1:
                sigma &= ~(1 << j)
            if q < lo_int and not E[j]:
                E[j] = 1
                emask |= 1 << j
        if cost_fn is not None:
            cur_cost = cost_now()
        x, comp_cum, idle = table.get(sigma, emask)
        if check_invariants:
            _check_state(Q, Q0, A, S, E, lo_int, hi_int, Iu, t, spec, Bw)

    rc = rf ** 3
    J_E = acc_hold / (rc * T) if T > 0 else 0.0
    tail = sum(hj * qj for hj, qj in zip(h, Q)) / rf * math.exp(-theta * T) / theta
    traj = None
    if record_interval:
        traj = (np.array(rec_t), np.array(rec_q, dtype=np.int64).reshape(len(rec_q), J))
    return SimResult(
        r=rf, rep=rep, seed=seed, T=T, theta=theta,
        J_E=J_E, J_D=acc_disc / rc, J_D_tail=tail, events=events,
        idleness=tuple(d / rf for d in diag),
        Q_final=tuple(Q), arrivals=tuple(A), completions=tuple(S),
        work_done=tuple(Bw), unused_capacity=tuple(Iu),
        avg_holding=acc_hold / (rc * T) if T > 0 else 0.0,
        avg_workload_cost=(acc_cost / (rc * T) if T > 0 else 0.0) if cost_fn is not None else None,
        trajectory=traj,
        wallclock_s=time.perf_counter() - wall0,
    )


def _check_state(Q, Q0, A, S, E, lo_int, hi_int, Iu, t, spec, Bw):
    for j in range(len(Q)):
        if Q[j] != Q0[j] + A[j] - S[j]:
            raise SimulationInvariantError("flow conservation broken")
        if Q[j] < 0:
            raise SimulationInvariantError("negative queue")
        if Q[j] < lo_int and not E[j]:
            raise SimulationInvariantError("depleted queue still served")
        if Q[j] >= hi_int and E[j]:
            raise SimulationInvariantError("stocked queue still cut off")
    for i in range(len(Iu)):
        used = sum(Bw[j] for j in range(len(Q)) if spec.K[i][j])
        if abs(t * float(spec.C[i]) - used - Iu[i]) > 1e-6 * max(1.0, t):
            raise SimulationInvariantError("unused capacity does not match t C - K B")
        if Iu[i] < -1e-9:
            raise SimulationInvariantError("negative unused capacity")


def _run_one(args):
    return simulate(*args[0], **args[1])


def simulate_replications(
    spec: NetworkSpec,
    ranking,
    params: PolicyParams | None = None,
    r=16,
    T: float = 1.0,
    theta: float = 1.0,
    reps: int = 1,
    seed: int = 0,
    q0: Sequence[int] | None = None,
    workers: int | None = None,
    **kwargs,
) -> CostReport:
    """Independent replications, merged in replication order."""
    params = params or PolicyParams()
    jobs = [((spec, ranking, params, r, q0, T, theta, seed, k), kwargs) for k in range(reps)]
    n = min(worker_count(workers), reps) if reps else 1
    if n <= 1:
        policy = ThresholdPolicy(spec, ranking, params)
        results = [simulate(*a, policy=policy, **kw) for a, kw in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(_run_one, jobs))
    results.sort(key=lambda res: res.rep)
    return CostReport(r=float(as_fraction(r)), T=T, theta=theta, replications=results)


def batch_means(series: Sequence[float], n_batches: int = 20) -> tuple[float, float]:
    """Mean and batch-means standard error of an equally spaced series."""
    x = np.asarray(series, dtype=float)
    size = len(x) // n_batches
    if size < 1:
        raise ValueError("series too short for the requested number of batches")
    b = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(b.mean()), float(b.std(ddof=1) / math.sqrt(n_batches))
