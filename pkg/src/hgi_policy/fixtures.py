"""Small reference networks used throughout the tests and the CLI.

Jobs are named ``x`` followed by the resources they use, so ``x12`` needs
resources 1 and 2.  Unless stated otherwise every job has unit load
(lambda = mu = 1), beta* = 1 and capacities are set to ``C = K rho``.
"""
from __future__ import annotations

from fractions import Fraction

from .network import NetworkSpec, as_fraction

__all__ = ["build", "BUILTIN", "builtin_names"]


def build(resources, jobs, *, lam=None, mu=None, beta=None) -> NetworkSpec:
    """Assemble a spec from ``jobs = [(name, [resources...], h), ...]``.

    Capacities are derived so the critical-load condition holds exactly.
    """
    names = [str(r) for r in resources]
    J = len(jobs)
    lam = [Fraction(1)] * J if lam is None else [as_fraction(v) for v in lam]
    mu = [Fraction(1)] * J if mu is None else [as_fraction(v) for v in mu]
    beta = [Fraction(1)] * J if beta is None else [as_fraction(v) for v in beta]
    K = tuple(
        tuple(1 if r in [str(x) for x in job[1]] else 0 for job in jobs) for r in names
    )
    rho = [l / m for l, m in zip(lam, mu)]
    C = [sum(rho[j] for j in range(J) if K[i][j]) for i in range(len(names))]
    return NetworkSpec(
        K=K, C=C, lam=lam, mu=mu, h=[as_fraction(job[2]) for job in jobs], beta_star=beta,
        resource_names=tuple(names), job_names=tuple(job[0] for job in jobs),
    )


def net_a() -> NetworkSpec:
    # every multi-resource job is cheaper to hold as singles: no multi secondaries
    return build("123", [
        ("x1", "1", 1), ("x2", "2", 1), ("x3", "3", 1),
        ("x123", "123", 4), ("x12", "12", 4), ("x23", "23", 4),
    ])


def net_b() -> NetworkSpec:
    return build("1234", [
        ("x1", "1", 4), ("x2", "2", 4), ("x3", "3", 4), ("x4", "4", 4),
        ("x12", "12", 6), ("x23", "23", 7), ("x1234", "1234", 13),
    ])


def net_c() -> NetworkSpec:
    # no viable ranking exists for this one
    return build("123", [
        ("x1", "1", 5), ("x2", "2", 5), ("x3", "3", 5),
        ("x12", "12", 7), ("x23", "23", 8), ("x123", "123", 11),
    ])


def net_d() -> NetworkSpec:
    half = Fraction(9, 2)
    return build("123456", [
        ("x1", "1", 2), ("x2", "2", 2), ("x3", "3", 2),
        ("x4", "4", 2), ("x5", "5", 2), ("x6", "6", 2),
        ("x123", "123", half), ("x456", "456", half), ("x36", "36", 3),
    ])


def net_e() -> NetworkSpec:
    return build("12", [("x1", "1", 1), ("x2", "2", 1), ("x12", "12", 2)])


def mm1() -> NetworkSpec:
    return build("1", [("x1", "1", 1)])


BUILTIN = {
    "NET-A": net_a,
    "NET-B": net_b,
    "NET-B-HT": net_b,
    "NET-C": net_c,
    "NET-D": net_d,
    "NET-E": net_e,
    "MM1": mm1,
}


def builtin_names() -> list[str]:
    return sorted(BUILTIN)
