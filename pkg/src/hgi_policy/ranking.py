"""Minimal covering sets, dominance sets and the search for a viable ranking."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator

from .network import JobClassification, NetworkSpec
from .workload import classify, workload_cost

__all__ = [
    "CoverSet",
    "Ranking",
    "minimal_covers",
    "minimal_covers_excluding",
    "opt_jobs",
    "iter_viable_rankings",
    "find_viable_ranking",
    "all_viable_rankings",
    "is_viable",
    "stuck_prefix",
    "check_subset_condition",
    "check_remove_condition",
]


@dataclass(frozen=True)
class CoverSet:
    jobs: frozenset[int]
    covered: frozenset[int]


@dataclass(frozen=True)
class Ranking:
    """Ordering of the multi-resource secondary jobs, highest rank index last.

    ``rho[0]`` is rank 1.  Prefix sets use the 1-based rank ``k``.
    """

    rho: tuple[int, ...]

    @property
    def m(self) -> int:
        return len(self.rho)

    def F(self, k: int) -> frozenset[int]:
        return frozenset(self.rho[: k - 1])

    def E(self, k: int) -> frozenset[int]:
        return frozenset(self.rho) - self.F(k)

    def rank_of(self, j: int) -> int:
        return self.rho.index(j) + 1

    def names(self, spec: NetworkSpec) -> list[str]:
        return [spec.job_names[j] for j in self.rho]

    def __iter__(self):
        return iter(self.rho)

    def __len__(self):
        return len(self.rho)


def _mask(resources: Iterable[int]) -> int:
    out = 0
    for i in resources:
        out |= 1 << i
    return out


def minimal_covers(spec: NetworkSpec, E: Iterable[int], k: int) -> list[CoverSet]:
    """All minimal subsets of ``E - {k}`` whose resources contain those of k.

    Only jobs sharing a resource with k can sit in a minimal cover, so the
    enumeration runs over that candidate list alone.
    """
    target = _mask(spec.resources_of(k))
    cand = sorted(j for j in set(E) - {k} if _mask(spec.resources_of(j)) & target)
    masks = {j: _mask(spec.resources_of(j)) for j in cand}
    found: list[tuple[int, ...]] = []
    for size in range(1, len(cand) + 1):
        for combo in itertools.combinations(cand, size):
            # a superset of a smaller cover is never minimal
            if any(set(f) <= set(combo) for f in found):
                continue
            union = 0
            for j in combo:
                union |= masks[j]
            if union & target != target:
                continue
            minimal = True
            for drop in combo:
                rest = 0
                for j in combo:
                    if j != drop:
                        rest |= masks[j]
                if rest & target == target:
                    minimal = False
                    break
            if minimal:
                found.append(combo)
    out = []
    for combo in found:
        covered = frozenset().union(*(spec.resources_of(j) for j in combo))
        out.append(CoverSet(jobs=frozenset(combo), covered=covered))
    return out


def minimal_covers_excluding(spec: NetworkSpec, E: Iterable[int], F: Iterable[int],
                             k: int) -> list[CoverSet]:
    """Minimal covers of k whose resources do not contain those of any job in F."""
    F = list(F)
    return [
        M for M in minimal_covers(spec, E, k)
        if not any(spec.resources_of(l) <= M.covered for l in F)
    ]


def _column_sum(spec: NetworkSpec, jobs: Iterable[int]) -> list[int]:
    v = [0] * spec.I
    for j in jobs:
        for i in spec.resources_of(j):
            v[i] += 1
    return v


def dominance_holds(spec: NetworkSpec, jprime: int, M: CoverSet) -> bool:
    """mu h of j' plus C(sum K_M - K_j') is at most C(sum K_M)."""
    total = _column_sum(spec, M.jobs)
    rest = list(total)
    for i in spec.resources_of(jprime):
        rest[i] -= 1
    lhs = spec.mu[jprime] * spec.h[jprime] + workload_cost(spec, rest)
    return lhs <= workload_cost(spec, total)


def opt_jobs(spec: NetworkSpec, E: Iterable[int], F: Iterable[int] = (),
             cls: JobClassification | None = None) -> frozenset[int]:
    """Jobs of E that dominate every admissible minimal cover built from E and the singles."""
    cls = cls or classify(spec)
    E = frozenset(E)
    F = frozenset(F)
    pool = E | cls.singles
    return frozenset(
        j for j in E
        if all(dominance_holds(spec, j, M) for M in minimal_covers_excluding(spec, pool, F, j))
    )


class _Search:
    def __init__(self, spec: NetworkSpec, cls: JobClassification | None):
        self.spec = spec
        self.cls = cls or classify(spec)
        self.multi = self.cls.multi
        self._memo: dict[frozenset, frozenset] = {}

    def options(self, prefix: tuple[int, ...]) -> list[int]:
        F = frozenset(prefix)
        if F not in self._memo:
            self._memo[F] = opt_jobs(self.spec, self.multi - F, F, self.cls)
        return sorted(self._memo[F])

    def walk(self, prefix: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
        if len(prefix) == len(self.multi):
            yield prefix
            return
        for j in self.options(prefix):
            yield from self.walk(prefix + (j,))


def iter_viable_rankings(spec: NetworkSpec, cls: JobClassification | None = None) -> Iterator[Ranking]:
    """Depth-first enumeration in lexicographic job-index order."""
    for rho in _Search(spec, cls).walk(()):
        yield Ranking(rho)


def find_viable_ranking(spec: NetworkSpec, cls: JobClassification | None = None) -> Ranking | None:
    """First viable ranking in lexicographic order, or None if there is none.

    A network without multi-resource secondary jobs gets the empty ranking.
    """
    return next(iter_viable_rankings(spec, cls), None)


def all_viable_rankings(spec: NetworkSpec, cls: JobClassification | None = None) -> list[Ranking]:
    return list(iter_viable_rankings(spec, cls))


def stuck_prefix(spec: NetworkSpec, cls: JobClassification | None = None):
    """The first prefix (DFS order) with no admissible extension, as a tuple of jobs.

    Returns None if a viable ranking exists.
    """
    search = _Search(spec, cls)

    def dive(prefix):
        if len(prefix) == len(search.multi):
            return None, True
        opts = search.options(prefix)
        if not opts:
            return prefix, False
        first = None
        for j in opts:
            stuck, ok = dive(prefix + (j,))
            if ok:
                return None, True
            first = first if first is not None else stuck
        return first, False

    stuck, ok = dive(())
    return None if ok else stuck


def is_viable(spec: NetworkSpec, ranking, cls: JobClassification | None = None) -> bool:
    """Re-derive each dominance set from scratch and check rank membership."""
    cls = cls or classify(spec)
    rho = tuple(getattr(ranking, "rho", ranking))
    if sorted(rho) != sorted(cls.multi):
        return False
    for k in range(1, len(rho) + 1):
        F = frozenset(rho[: k - 1])
        if rho[k - 1] not in opt_jobs(spec, cls.multi - F, F, cls):
            return False
    return True


def check_subset_condition(spec: NetworkSpec, cls: JobClassification | None = None) -> bool:
    """Multi-resource secondary jobs have pairwise nested or disjoint resource sets."""
    cls = cls or classify(spec)
    for a, b in itertools.combinations(sorted(cls.multi), 2):
        Na, Nb = cls.N[a], cls.N[b]
        if not (Na <= Nb or Nb <= Na or not (Na & Nb)):
            return False
    return True


def check_remove_condition(spec: NetworkSpec, cls: JobClassification | None = None) -> bool:
    """Every cover of a non-dominating job by the remaining jobs is an exact partition."""
    cls = cls or classify(spec)
    O = opt_jobs(spec, cls.multi, (), cls)
    rest = cls.multi - O
    for j in rest:
        for M in minimal_covers_excluding(spec, rest | cls.singles, O, j):
            if sum(len(cls.N[l]) for l in M.jobs) != len(cls.N[j]):
                return False
    return True


def cost_of_columns(spec: NetworkSpec, jobs: Iterable[int]) -> Fraction:
    return workload_cost(spec, _column_sum(spec, jobs))
