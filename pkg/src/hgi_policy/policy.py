"""Threshold rate-allocation policy with hysteresis gating.

The nominal allocation ``y`` depends on the queue state only through the set
of stocked queues, so it is computed once per stocked set (exactly, in
rationals) and cached.  The gated allocation ``x`` zeroes every job whose
hysteresis flag is raised.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .network import JobClassification, NetworkSpec, as_fraction
from .workload import classify, zeta_sets

__all__ = [
    "PolicyParams",
    "ControlState",
    "ThresholdPolicy",
    "thresholds",
    "stocked_sets",
    "initial_flags",
    "update_hysteresis",
    "rate_vector",
    "policy_delta",
]


@dataclass(frozen=True)
class PolicyParams:
    """Threshold exponent and constants.

    Queues at or above ``c2 * r**alpha`` are stocked; a queue that falls
    below ``c1 * r**alpha`` is cut off until it is stocked again.
    """

    alpha: float = 0.4
    c1: float = 1.0
    c2: float = 2.0

    def __post_init__(self):
        if not 0 < self.alpha < 0.5:
            raise ValueError("alpha must lie in (0, 1/2)")
        if not 0 < self.c1 < self.c2:
            raise ValueError("need 0 < c1 < c2")


@dataclass(frozen=True)
class ControlState:
    Q: tuple[int, ...]
    E: tuple[int, ...]
    r: float


def policy_delta(spec: NetworkSpec) -> Fraction:
    """Perturbation size min(rho) / (2J)."""
    return min(spec.rho) / (2 * spec.J)


def thresholds(params: PolicyParams, r) -> tuple[float, float]:
    """Return ``(c1 r^alpha, c2 r^alpha)``."""
    ra = float(r) ** params.alpha
    return params.c1 * ra, params.c2 * ra


def stocked_sets(spec: NetworkSpec, state: ControlState, params: PolicyParams):
    """Stocked jobs and the resources they touch."""
    _, hi = thresholds(params, state.r)
    sigma = frozenset(j for j, q in enumerate(state.Q) if q >= hi)
    varpi = frozenset(i for j in sigma for i in spec.resources_of(j))
    return sigma, varpi


def initial_flags(Q: Sequence[int], params: PolicyParams, r) -> tuple[int, ...]:
    """A queue that starts below the lower threshold starts cut off."""
    lo, _ = thresholds(params, r)
    return tuple(1 if q < lo else 0 for q in Q)


def update_hysteresis(state: ControlState, params: PolicyParams, j: int) -> int:
    """New flag of job j after its queue changed."""
    lo, hi = thresholds(params, state.r)
    q, e = state.Q[j], state.E[j]
    if e == 0 and q < lo:
        return 1
    if e == 1 and q >= hi:
        return 0
    return e


class ThresholdPolicy:
    """Allocation rule bound to a network, a viable ranking and parameters."""

    def __init__(self, spec: NetworkSpec, ranking, params: PolicyParams | None = None,
                 cls: JobClassification | None = None):
        self.spec = spec
        self.params = params or PolicyParams()
        self.cls = cls or classify(spec)
        self.rho = tuple(getattr(ranking, "rho", ranking))
        if sorted(self.rho) != sorted(self.cls.multi):
            raise ValueError("ranking must order exactly the multi-resource secondary jobs")
        self.m = len(self.rho)
        self.delta = policy_delta(spec)
        J, I = spec.J, spec.I
        self.job_res_mask = [sum(1 << i for i in spec.resources_of(j)) for j in range(J)]
        zeta_k, zeta_0 = zeta_sets(spec, self.rho, self.cls)
        self.zeta_k = zeta_k
        self.zeta_0 = zeta_0
        self._zeta_mask = [
            [sum(1 << j for j in zeta_k[k][i]) for i in range(I)] for k in range(self.m)
        ]
        self._at = [[j for j in range(J) if spec.K[i][j]] for i in range(I)]
        self._y_exact: dict[int, tuple[Fraction, ...]] = {}
        self._y_float: dict[int, tuple[float, ...]] = {}

    # --- nominal allocation -------------------------------------------------
    def _compute_y(self, sigma: int) -> tuple[Fraction, ...]:
        spec, cls, delta, m = self.spec, self.cls, self.delta, self.m
        rho = spec.rho
        y: list[Fraction | None] = [None] * spec.J
        small = delta / (spec.J * 2 ** (m + 3))
        for j in cls.primary:
            y[j] = rho[j] + delta if sigma >> j & 1 else rho[j] - small
        two = Fraction(2)
        for k0, j in enumerate(self.rho):
            k = k0 + 1
            masks = self._zeta_mask[k0]
            if all(masks[i] & sigma for i in cls.N[j]):
                y[j] = rho[j] - two ** (k - m - 2) * delta
            elif sigma >> j & 1:
                y[j] = rho[j] + two ** (k - m - 2) * delta
            else:
                y[j] = rho[j] - two ** (-k - m - 2) * delta
        varpi = 0
        for j in range(spec.J):
            if sigma >> j & 1:
                varpi |= self.job_res_mask[j]
        for j in cls.singles:
            i = cls.resource_of[j]
            if varpi >> i & 1:
                y[j] = spec.C[i] - sum(y[l] for l in self._at[i] if l != j)
            else:
                y[j] = rho[j] - delta
        return tuple(y)

    def sigma_mask(self, Q: Sequence[int], r) -> int:
        _, hi = thresholds(self.params, r)
        out = 0
        for j, q in enumerate(Q):
            if q >= hi:
                out |= 1 << j
        return out

    def nominal(self, sigma: int, exact: bool = True) -> tuple:
        """Ungated allocation y for the stocked set given as a job bitmask."""
        y = self._y_exact.get(sigma)
        if y is None:
            y = self._y_exact[sigma] = self._compute_y(sigma)
        if exact:
            return y
        yf = self._y_float.get(sigma)
        if yf is None:
            yf = self._y_float[sigma] = tuple(float(v) for v in y)
        return yf

    def allocation(self, state: ControlState, exact: bool = True):
        """Return ``(y, x, sigma, varpi)`` for a control state."""
        sigma = self.sigma_mask(state.Q, state.r)
        y = self.nominal(sigma, exact)
        zero = Fraction(0) if exact else 0.0
        x = tuple(zero if e else v for v, e in zip(y, state.E))
        sig = frozenset(j for j in range(self.spec.J) if sigma >> j & 1)
        varpi = frozenset(i for j in sig for i in self.spec.resources_of(j))
        return y, x, sig, varpi

    def rates(self, state: ControlState, exact: bool = True) -> tuple:
        return self.allocation(state, exact)[1]

    # --- quantities used by the property checks ----------------------------
    def r_hat(self) -> Fraction:
        """Smallest r at which the default embedding meets the closeness condition.

        Under the embedding |rho_j - rho_j^r| = beta*_j / r, and the bound
        2^(-2m-6) delta / J must hold for every job.
        """
        bound = self.delta / (2 ** (2 * self.m + 6) * self.spec.J)
        return max(as_fraction(b) for b in self.spec.beta_star) / bound


def rate_vector(spec: NetworkSpec, ranking, cls: JobClassification | None,
                state: ControlState, params: PolicyParams, exact: bool = True) -> tuple:
    """Gated allocation x for one control state."""
    return ThresholdPolicy(spec, ranking, params, cls).rates(state, exact)


def integer_thresholds(params: PolicyParams, r) -> tuple[int, int]:
    """Integer forms: ``Q < lo  <=>  Q < lo_int`` and ``Q >= hi  <=>  Q >= hi_int``."""
    lo, hi = thresholds(params, r)
    return math.ceil(lo), math.ceil(hi)
