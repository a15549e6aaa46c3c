"""Resource-sharing network instances, validation and the heavy-traffic family.

All numerical fields of a :class:`NetworkSpec` are held as exact
:class:`fractions.Fraction` values.  Floating point only enters at the
simulation boundary.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

__all__ = [
    "NetworkShapeError",
    "PreconditionError",
    "NetworkSpec",
    "ScaledParams",
    "JobClassification",
    "ValidationReport",
    "as_fraction",
    "validate",
    "scaled_params",
    "classification",
    "load_network",
    "network_from_dict",
    "network_to_dict",
]


class NetworkShapeError(ValueError):
    """Raised when array dimensions of a network are inconsistent."""


class PreconditionError(ValueError):
    """Raised when an operation is called outside its admissible range."""


def as_fraction(value) -> Fraction:
    """Convert ints, decimal strings, ``"p/q"`` strings or Fractions exactly.

    Floats are accepted but converted through ``repr`` so that ``0.1`` becomes
    ``1/10`` rather than its binary expansion.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as a rational number")


def _frac_vector(values: Iterable) -> tuple[Fraction, ...]:
    return tuple(as_fraction(v) for v in values)


@dataclass(frozen=True)
class NetworkSpec:
    """Static problem instance.

    ``K`` is the I x J incidence matrix (tuple of rows).  ``lam`` and ``mu``
    are the limiting arrival and service rates, ``h`` the holding costs and
    ``beta_star`` the heavy-traffic drift parameter.
    """

    K: tuple[tuple[int, ...], ...]
    C: tuple[Fraction, ...]
    lam: tuple[Fraction, ...]
    mu: tuple[Fraction, ...]
    h: tuple[Fraction, ...]
    beta_star: tuple[Fraction, ...]
    resource_names: tuple[str, ...] = ()
    job_names: tuple[str, ...] = ()

    def __post_init__(self):
        K = tuple(tuple(int(v) for v in row) for row in self.K)
        object.__setattr__(self, "K", K)
        for name in ("C", "lam", "mu", "h", "beta_star"):
            object.__setattr__(self, name, _frac_vector(getattr(self, name)))
        I = len(K)
        if I == 0:
            raise NetworkShapeError("network needs at least one resource")
        J = len(K[0])
        if J == 0 or any(len(row) != J for row in K):
            raise NetworkShapeError("K must be a non-empty rectangular matrix")
        if any(v not in (0, 1) for row in K for v in row):
            raise NetworkShapeError("K entries must be 0 or 1")
        if len(self.C) != I:
            raise NetworkShapeError(f"C has length {len(self.C)}, expected {I}")
        for name in ("lam", "mu", "h", "beta_star"):
            if len(getattr(self, name)) != J:
                raise NetworkShapeError(
                    f"{name} has length {len(getattr(self, name))}, expected {J}"
                )
        if not self.resource_names:
            object.__setattr__(self, "resource_names", tuple(str(i + 1) for i in range(I)))
        if not self.job_names:
            object.__setattr__(self, "job_names", tuple(f"j{j + 1}" for j in range(J)))
        if len(self.resource_names) != I or len(self.job_names) != J:
            raise NetworkShapeError("name lists do not match the dimensions of K")

    @property
    def I(self) -> int:
        return len(self.K)

    @property
    def J(self) -> int:
        return len(self.K[0])

    @property
    def rho(self) -> tuple[Fraction, ...]:
        """Nominal loads lambda_j / mu_j."""
        return tuple(l / m for l, m in zip(self.lam, self.mu))

    @property
    def v_star(self) -> tuple[Fraction, ...]:
        """Workload drift magnitude K beta*."""
        return self.matvec(self.beta_star)

    def matvec(self, x: Sequence) -> tuple:
        """Return ``K @ x`` keeping the element type of ``x``."""
        return tuple(sum(x[j] for j in range(self.J) if row[j]) for row in self.K)

    def column(self, j: int) -> tuple[int, ...]:
        return tuple(row[j] for row in self.K)

    def resources_of(self, j: int) -> frozenset[int]:
        return frozenset(i for i in range(self.I) if self.K[i][j])

    def G(self) -> tuple[tuple[Fraction, ...], ...]:
        """The limiting workload matrix K M with M = diag(1/mu)."""
        return tuple(
            tuple(Fraction(row[j]) / self.mu[j] for j in range(self.J)) for row in self.K
        )

    def job_index(self, name: str) -> int:
        return self.job_names.index(name)

    def jobs(self, names: Iterable[str]) -> frozenset[int]:
        return frozenset(self.job_index(n) for n in names)

    def names(self, jobs: Iterable[int]) -> list[str]:
        return [self.job_names[j] for j in sorted(jobs)]

    def replace(self, **changes) -> "NetworkSpec":
        fields = dict(
            K=self.K, C=self.C, lam=self.lam, mu=self.mu, h=self.h,
            beta_star=self.beta_star, resource_names=self.resource_names,
            job_names=self.job_names,
        )
        fields.update(changes)
        return NetworkSpec(**fields)

    def drop_job(self, j: int) -> "NetworkSpec":
        keep = [k for k in range(self.J) if k != j]
        pick = lambda v: tuple(v[k] for k in keep)  # noqa: E731
        return NetworkSpec(
            K=tuple(pick(row) for row in self.K), C=self.C, lam=pick(self.lam),
            mu=pick(self.mu), h=pick(self.h), beta_star=pick(self.beta_star),
            resource_names=self.resource_names, job_names=pick(self.job_names),
        )


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate(spec: NetworkSpec) -> ValidationReport:
    """Check every standing condition on the instance.

    Returns a report naming each failed check; dimension problems never get
    this far because :class:`NetworkSpec` refuses to construct.
    """
    problems: list[str] = []
    I, J = spec.I, spec.J
    cols = [spec.column(j) for j in range(J)]
    if len(set(cols)) != J:
        problems.append("distinct_columns")
    if any(sum(c) == 0 for c in cols):
        problems.append("job_without_resource")
    singles_at = [[j for j in range(J) if sum(cols[j]) == 1 and cols[j][i]] for i in range(I)]
    missing = [spec.resource_names[i] for i in range(I) if len(singles_at[i]) != 1]
    if missing:
        problems.append("local_traffic:" + ",".join(missing))
    for name in ("C", "lam", "mu", "h"):
        if any(v <= 0 for v in getattr(spec, name)):
            problems.append(f"positivity:{name}")
    if all(m > 0 for m in spec.mu) and spec.matvec(spec.rho) != spec.C:
        problems.append("critical_load")
    if any(v <= 0 for v in spec.v_star):
        problems.append("positive_drift")
    return ValidationReport(tuple(problems))


@dataclass(frozen=True)
class ScaledParams:
    r: Fraction
    lam_r: tuple[Fraction, ...]
    mu_r: tuple[Fraction, ...]
    rho_r: tuple[Fraction, ...]
    G_r: tuple[tuple[Fraction, ...], ...]


def scaled_params(spec: NetworkSpec, r) -> ScaledParams:
    """Parameters of the r-th system under the default embedding.

    Service rates are held at their limits and arrival rates are lowered so
    that ``r * (rho - rho_r) == beta_star`` exactly.
    """
    r = as_fraction(r)
    if r <= 0:
        raise PreconditionError("r must be positive")
    lam_r = tuple(m * (p - b / r) for m, p, b in zip(spec.mu, spec.rho, spec.beta_star))
    bad = [spec.job_names[j] for j, l in enumerate(lam_r) if l <= 0]
    if bad:
        raise PreconditionError(
            f"r={r} too small: non-positive arrival rate for {', '.join(bad)}"
        )
    mu_r = spec.mu
    rho_r = tuple(l / m for l, m in zip(lam_r, mu_r))
    G_r = tuple(tuple(Fraction(row[j]) / mu_r[j] for j in range(spec.J)) for row in spec.K)
    return ScaledParams(r=r, lam_r=lam_r, mu_r=mu_r, rho_r=rho_r, G_r=G_r)


@dataclass(frozen=True)
class JobClassification:
    """Resource sets and job partitions.

    ``primary``/``secondary``/``multi`` stay empty until filled in by
    :func:`hgi_policy.workload.classify_primary`.
    """

    N: tuple[frozenset[int], ...]
    singles: frozenset[int]
    single_of: tuple[int, ...]            # resource i -> its single-resource job
    resource_of: dict[int, int]           # single job j -> its resource
    primary: frozenset[int] = frozenset()
    secondary: frozenset[int] = frozenset()
    multi: frozenset[int] = frozenset()
    extras: dict = field(default_factory=dict, compare=False, repr=False)


def classification(spec: NetworkSpec) -> JobClassification:
    """Resource sets N_j, the single-resource jobs and their pairing with resources."""
    N = tuple(spec.resources_of(j) for j in range(spec.J))
    singles = frozenset(j for j in range(spec.J) if len(N[j]) == 1)
    resource_of = {j: next(iter(N[j])) for j in sorted(singles)}
    single_of = []
    for i in range(spec.I):
        at_i = [j for j, res in resource_of.items() if res == i]
        if len(at_i) != 1:
            raise PreconditionError(
                f"resource {spec.resource_names[i]} has {len(at_i)} single-resource jobs"
            )
        single_of.append(at_i[0])
    return JobClassification(N=N, singles=singles, single_of=tuple(single_of),
                             resource_of=resource_of)


# --- network definition files -------------------------------------------------

def network_from_dict(doc: dict) -> NetworkSpec:
    """Build a spec from the ``{resources: [...], jobs: [...]}`` document layout."""
    try:
        resources = doc["resources"]
        jobs = doc["jobs"]
    except (KeyError, TypeError) as exc:
        raise NetworkShapeError(f"network document lacks {exc}") from None
    rnames = [str(r["name"]) for r in resources]
    if len(set(rnames)) != len(rnames):
        raise NetworkShapeError("duplicate resource names")
    pos = {name: i for i, name in enumerate(rnames)}
    K = [[0] * len(jobs) for _ in rnames]
    for j, job in enumerate(jobs):
        for res in job["resources"]:
            if str(res) not in pos:
                raise NetworkShapeError(f"job {job.get('name')} uses unknown resource {res!r}")
            K[pos[str(res)]][j] = 1
    return NetworkSpec(
        K=tuple(tuple(row) for row in K),
        C=[r["capacity"] for r in resources],
        lam=[job["lambda"] for job in jobs],
        mu=[job["mu"] for job in jobs],
        h=[job["h"] for job in jobs],
        beta_star=[job["beta_star"] for job in jobs],
        resource_names=tuple(rnames),
        job_names=tuple(str(job["name"]) for job in jobs),
    )


def _num_str(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def network_to_dict(spec: NetworkSpec) -> dict:
    return {
        "resources": [
            {"name": n, "capacity": _num_str(c)} for n, c in zip(spec.resource_names, spec.C)
        ],
        "jobs": [
            {
                "name": spec.job_names[j],
                "resources": [spec.resource_names[i] for i in sorted(spec.resources_of(j))],
                "lambda": _num_str(spec.lam[j]),
                "mu": _num_str(spec.mu[j]),
                "h": _num_str(spec.h[j]),
                "beta_star": _num_str(spec.beta_star[j]),
            }
            for j in range(spec.J)
        ],
    }


def load_network(path: str | Path) -> NetworkSpec:
    """Read a JSON or YAML network file (chosen by suffix, JSON otherwise)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() in (".yaml", ".yml"):
        import yaml

        doc = yaml.safe_load(text)
    else:
        doc = json.loads(text)
    return network_from_dict(doc)
