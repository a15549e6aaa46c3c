"""Workload cost C(w) = min{h.q : G q = w, q >= 0} and its structure.

Exact evaluation goes through the rational simplex in :mod:`hgi_policy.lp`.
For bulk floating-point evaluation (simulation and Monte Carlo) the cost is
rewritten through LP duality as a maximum of linear forms over the vertices
of ``{pi : G^T pi <= h}``, which vectorises cleanly with numpy.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .lp import LPInfeasible, solve_standard_form
from .network import JobClassification, NetworkSpec, as_fraction, classification

__all__ = [
    "CostSolution",
    "SpecError",
    "lp_min_cost",
    "workload_cost",
    "classify_primary",
    "classify",
    "qstar",
    "zeta_sets",
    "inefficiency_constant",
    "inefficiency_gap",
    "CostFunction",
    "dual_vertices",
    "lipschitz_constant",
]


class SpecError(ValueError):
    """The network violates a standing condition needed by the computation."""


@dataclass(frozen=True)
class CostSolution:
    value: object
    q: tuple


def _as_workload(spec: NetworkSpec, w, exact: bool) -> tuple:
    if len(w) != spec.I:
        raise ValueError(f"workload has length {len(w)}, expected {spec.I}")
    w = tuple(as_fraction(v) if exact else float(v) for v in w)
    if any(v < 0 for v in w):
        raise ValueError("workload must be nonnegative")
    return w


def _start_basis(spec: NetworkSpec):
    try:
        return list(classification(spec).single_of)
    except ValueError:
        return None


@lru_cache(maxsize=65536)
def _bland_solution(spec: NetworkSpec, w: tuple, exact: bool) -> CostSolution:
    G = spec.G()
    try:
        res = solve_standard_form(spec.h, G, w, exact=exact, basis=_start_basis(spec))
    except LPInfeasible:
        raise SpecError("workload LP infeasible; local traffic condition fails") from None
    return CostSolution(value=res.value, q=tuple(res.x))


def lp_min_cost(spec: NetworkSpec, w: Sequence, *, exact: bool = True, ranking=None) -> CostSolution:
    """Minimal holding cost of a queue configuration carrying workload ``w``.

    The value always comes from the simplex.  With a viable ``ranking`` the
    returned minimiser is the greedy one from :func:`qstar`, otherwise it is
    the vertex Bland's rule stops at.
    """
    w = _as_workload(spec, w, exact)
    sol = _bland_solution(spec, w, exact)
    if ranking is None:
        return sol
    greedy = qstar(spec, ranking, w, exact=exact)
    if exact and greedy.value != sol.value:
        raise ValueError("ranking is not viable: greedy cost differs from the LP optimum")
    return CostSolution(value=sol.value, q=greedy.q)


def workload_cost(spec: NetworkSpec, w: Sequence) -> Fraction:
    """Exact value of C(w)."""
    return lp_min_cost(spec, w).value


def classify_primary(spec: NetworkSpec) -> tuple[frozenset, frozenset, frozenset]:
    """Split jobs into primary, secondary and multi-resource secondary sets.

    Job j is primary when C(g_j) < h_j, tested in exact arithmetic.
    """
    G = spec.G()
    base = classification(spec)
    primary = set()
    for j in range(spec.J):
        if j in base.singles:
            continue
        g = tuple(G[i][j] for i in range(spec.I))
        if workload_cost(spec, g) < spec.h[j]:
            primary.add(j)
    primary = frozenset(primary)
    secondary = frozenset(range(spec.J)) - primary
    return primary, secondary, secondary - base.singles


def classify(spec: NetworkSpec) -> JobClassification:
    """Full classification with the primary/secondary split filled in."""
    base = classification(spec)
    primary, secondary, multi = classify_primary(spec)
    return replace(base, primary=primary, secondary=secondary, multi=multi)


def _rho_of(ranking) -> tuple[int, ...]:
    return tuple(getattr(ranking, "rho", ranking))


def qstar(spec: NetworkSpec, ranking, w: Sequence, *, exact: bool = True,
          cls: JobClassification | None = None) -> CostSolution:
    """Greedy minimiser built along a viable ranking.

    Ranked jobs take as much workload as their most loaded-out resource
    allows, in rank order; single-resource jobs absorb what remains and
    primary jobs hold nothing.
    """
    w = _as_workload(spec, w, exact)
    cls = cls or classify(spec)
    rho = _rho_of(ranking)
    if set(rho) != set(cls.multi):
        raise ValueError("ranking must order exactly the multi-resource secondary jobs")
    zero = Fraction(0) if exact else 0.0
    mu = spec.mu if exact else tuple(float(m) for m in spec.mu)
    residual = list(w)
    q = [zero] * spec.J
    for j in rho:
        load = min(residual[i] for i in cls.N[j])
        q[j] = load * mu[j]
        for i in cls.N[j]:
            residual[i] -= load
    for j in cls.singles:
        i = cls.resource_of[j]
        q[j] = residual[i] * mu[j]
    h = spec.h if exact else tuple(float(v) for v in spec.h)
    value = sum((hj * qj for hj, qj in zip(h, q)), zero)
    return CostSolution(value=value, q=tuple(q))


def zeta_sets(spec: NetworkSpec, ranking, cls: JobClassification | None = None):
    """Return ``(zeta_k, zeta_0)``.

    ``zeta_k[k][i]`` (k = 0..m-1 for rank k+1) holds the jobs at resource i
    that are not among the first k+1 ranked jobs; ``zeta_0[i]`` holds the
    primary jobs at resource i.
    """
    cls = cls or classify(spec)
    rho = _rho_of(ranking)
    at = [frozenset(j for j in range(spec.J) if spec.K[i][j]) for i in range(spec.I)]
    zeta_k = tuple(
        tuple(at[i] - frozenset(rho[: k + 1]) for i in range(spec.I)) for k in range(len(rho))
    )
    zeta_0 = tuple(at[i] & cls.primary for i in range(spec.I))
    return zeta_k, zeta_0


def inefficiency_constant(spec: NetworkSpec) -> Fraction:
    """max(h) max(mu) / min(mu) * J^2 * 2^J."""
    J = spec.J
    return max(spec.h) * max(spec.mu) / min(spec.mu) * J * J * 2**J


def inefficiency_gap(spec: NetworkSpec, ranking, cls: JobClassification | None, q: Sequence):
    """Both sides of ``|h.q - C(Gq)| <= B * (ranked and primary queue mass)``.

    Computed exactly; returns ``(lhs, rhs)``.
    """
    cls = cls or classify(spec)
    q = tuple(as_fraction(v) for v in q)
    if any(v < 0 for v in q):
        raise ValueError("queue vector must be nonnegative")
    G = spec.G()
    w = tuple(sum(G[i][j] * q[j] for j in range(spec.J)) for i in range(spec.I))
    hq = sum(hj * qj for hj, qj in zip(spec.h, q))
    lhs = abs(hq - workload_cost(spec, w))
    rho = _rho_of(ranking)
    zeta_k, zeta_0 = zeta_sets(spec, rho, cls)
    mass = Fraction(0)
    for k, j in enumerate(rho):
        mass += min(sum((q[l] for l in zeta_k[k][i]), Fraction(0)) for i in cls.N[j])
    for i in range(spec.I):
        mass += sum((q[l] for l in zeta_0[i]), Fraction(0))
    return lhs, inefficiency_constant(spec) * mass


def _solve_square(A, b):
    """Exact Gauss-Jordan solve; None when singular."""
    n = len(A)
    M = [list(row) + [bv] for row, bv in zip(A, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        p = M[col][col]
        M[col] = [v / p for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


@lru_cache(maxsize=64)
def dual_vertices(spec: NetworkSpec) -> tuple[tuple[Fraction, ...], ...]:
    """Vertices of the dual polyhedron ``{pi : G^T pi <= h}``, exactly.

    For w >= 0 the maximum of ``pi . w`` over this set is attained at one of
    them and equals C(w).
    """
    G = spec.G()
    I, J = spec.I, spec.J
    cols = [tuple(G[i][j] for i in range(I)) for j in range(J)]
    found = set()
    for subset in itertools.combinations(range(J), I):
        pi = _solve_square([cols[j] for j in subset], [spec.h[j] for j in subset])
        if pi is None:
            continue
        if all(sum(c[i] * pi[i] for i in range(I)) <= spec.h[j] for j, c in enumerate(cols)):
            found.add(tuple(pi))
    return tuple(sorted(found))


class CostFunction:
    """Vectorised floating-point C(w) via the dual vertex representation."""

    def __init__(self, spec: NetworkSpec):
        self.spec = spec
        self.vertices = np.array(dual_vertices(spec), dtype=float)

    def __call__(self, w) -> np.ndarray | float:
        w = np.asarray(w, dtype=float)
        vals = w @ self.vertices.T
        out = vals.max(axis=-1)
        return float(out) if out.ndim == 0 else out


def lipschitz_constant(spec: NetworkSpec) -> Fraction:
    """Sup-norm Lipschitz constant J * max_j h_j mu_j used in the property tests."""
    return spec.J * max(h * m for h, m in zip(spec.h, spec.mu))
