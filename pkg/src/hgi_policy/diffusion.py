"""Skorohod reflection on the orthant and the reflected Brownian workload.

The reference costs are Monte Carlo averages of the workload cost along an
Euler path of the reflected Brownian motion with drift ``-v*`` and
covariance ``Lambda Lambda^T``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .network import NetworkSpec
from .simulate import replication_seed
from .workload import CostFunction

__all__ = [
    "ReflectedPath",
    "RbmConfig",
    "HgiEstimate",
    "skorohod_1d",
    "skorohod_orthant",
    "diffusion_matrix",
    "rbm_simulate",
    "hgi_discounted",
    "hgi_ergodic",
]

_RBM_STREAM = 2


@dataclass
class ReflectedPath:
    times: np.ndarray
    phi: np.ndarray     # shape (n,) or (n, I)
    eta: np.ndarray


def skorohod_1d(psi: Sequence[float], times: Sequence[float] | None = None) -> ReflectedPath:
    """Reflect a path sampled on a grid: ``phi = psi + max(0, sup(-psi))``."""
    psi = np.asarray(psi, dtype=float)
    if psi.ndim != 1 or psi.size == 0:
        raise ValueError("psi must be a nonempty 1-d array")
    if psi[0] < 0:
        raise ValueError("psi(0) must be nonnegative")
    eta = np.maximum.accumulate(np.maximum(-psi, 0.0))
    t = np.arange(psi.size, dtype=float) if times is None else np.asarray(times, dtype=float)
    return ReflectedPath(times=t, phi=psi + eta, eta=eta)


def skorohod_orthant(psi, times: Sequence[float] | None = None) -> ReflectedPath:
    """Coordinatewise reflection of an ``(n, I)`` path."""
    psi = np.asarray(psi, dtype=float)
    if psi.ndim != 2:
        raise ValueError("psi must have shape (n, I)")
    if np.any(psi[0] < 0):
        raise ValueError("psi(0) must be nonnegative")
    eta = np.maximum.accumulate(np.maximum(-psi, 0.0), axis=0)
    t = np.arange(psi.shape[0], dtype=float) if times is None else np.asarray(times, dtype=float)
    return ReflectedPath(times=t, phi=psi + eta, eta=eta)


def diffusion_matrix(spec: NetworkSpec) -> np.ndarray:
    """``K diag(zeta)^(1/2)`` with ``zeta_j = 2 rho_j / mu_j``."""
    zeta = np.array([float(2 * r / m) for r, m in zip(spec.rho, spec.mu)])
    return np.array(spec.K, dtype=float) * np.sqrt(zeta)


@dataclass
class RbmConfig:
    """Euler settings for the reflected Brownian workload.

    ``Lambda`` and ``drift`` default to the values implied by the network;
    overriding them is meant for tests with known answers.
    """

    w0: Sequence[float] | None = None
    dt: float = 1e-3
    horizon: float = 10.0
    burn_in: float | None = None
    seed: int = 0
    reps: int = 1
    Lambda: np.ndarray | None = None
    drift: Sequence[float] | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        if self.reps < 1:
            raise ValueError("need at least one replication")
        if self.Lambda is not None:
            L = np.asarray(self.Lambda, dtype=float)
            if not np.all(np.isfinite(L)):
                raise ValueError("Lambda must be finite")
            self.Lambda = L

    def resolved(self, spec: NetworkSpec):
        """Return ``(w0, drift, Lambda)`` as float arrays."""
        w0 = np.zeros(spec.I) if self.w0 is None else np.asarray(self.w0, dtype=float)
        if w0.shape != (spec.I,) or np.any(w0 < 0):
            raise ValueError(f"w0 must be a nonnegative vector of length {spec.I}")
        drift = (-np.array([float(v) for v in spec.v_star]) if self.drift is None
                 else np.asarray(self.drift, dtype=float))
        L = diffusion_matrix(spec) if self.Lambda is None else self.Lambda
        if L.ndim != 2 or L.shape[0] != spec.I:
            raise ValueError("Lambda must have I rows")
        return w0, drift, L

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def burn(self) -> float:
        return 0.1 * self.horizon if self.burn_in is None else self.burn_in


def rbm_simulate(spec: NetworkSpec, config: RbmConfig, rep: int = 0) -> ReflectedPath:
    """One Euler path on the grid ``k * dt``, reflected at every step.

    Projecting after each increment gives the same grid values as applying
    the reflection map to the cumulative driver.
    """
    w0, drift, L = config.resolved(spec)
    n = config.steps
    times = np.arange(n + 1) * config.dt
    rng = np.random.default_rng(replication_seed(config.seed, 0, rep, stream=_RBM_STREAM))
    psi = w0 + np.outer(times, drift)
    if np.any(L):
        xi = rng.standard_normal((n, L.shape[1]))
        psi[1:] += np.cumsum(math.sqrt(config.dt) * xi @ L.T, axis=0)
    return skorohod_orthant(psi, times)


@dataclass
class HgiEstimate:
    mean: float
    stderr: float
    values: list[float]
    tail: float = 0.0


def _summary(vals: list[float], tail: float = 0.0) -> HgiEstimate:
    v = np.asarray(vals)
    se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
    return HgiEstimate(mean=float(v.mean()), stderr=se, values=list(vals), tail=tail)


def hgi_discounted(spec: NetworkSpec, w0: Sequence[float], theta: float,
                   config: RbmConfig) -> HgiEstimate:
    """Estimate of the discounted cost of the reflected workload started at w0.

    The integral is truncated at ``config.horizon`` (trapezoid rule on the
    grid); ``tail`` is the mean of ``C(W(horizon)) e^(-theta horizon) / theta``.
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    cfg = RbmConfig(**{**config.__dict__, "w0": w0})
    cost = CostFunction(spec)
    vals, tails = [], []
    for k in range(cfg.reps):
        path = rbm_simulate(spec, cfg, rep=k)
        c = np.atleast_1d(cost(path.phi))
        f = np.exp(-theta * path.times) * c
        vals.append(float(np.trapezoid(f, path.times)) if len(f) > 1 else 0.0)
        tails.append(float(c[-1]) * math.exp(-theta * path.times[-1]) / theta)
    return _summary(vals, float(np.mean(tails)))


def hgi_ergodic(spec: NetworkSpec, config: RbmConfig) -> HgiEstimate:
    """Long-run average of the workload cost after a burn-in period."""
    cost = CostFunction(spec)
    vals = []
    for k in range(config.reps):
        path = rbm_simulate(spec, config, rep=k)
        keep = path.times >= config.burn
        c = np.atleast_1d(cost(path.phi[keep]))
        vals.append(float(c.mean()))
    return _summary(vals)
