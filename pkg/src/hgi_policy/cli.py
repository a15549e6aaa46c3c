"""Command-line entry point: ``hgi-policy <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .diffusion import RbmConfig, hgi_discounted, hgi_ergodic
from .fixtures import BUILTIN
from .network import NetworkSpec, PreconditionError, load_network, validate
from .policy import ControlState, PolicyParams, ThresholdPolicy, thresholds
from .ranking import find_viable_ranking, all_viable_rankings, stuck_prefix
from .simulate import SimResult, simulate_replications
from .workload import classify, inefficiency_constant, lp_min_cost

__all__ = [
    "EXIT_OK", "EXIT_VALIDATION", "EXIT_NO_RANKING", "EXIT_IO",
    "SweepConfig", "NoRankingError", "run_sweep", "report_gap",
    "write_csv", "read_csv", "main",
]

EXIT_OK = 0
EXIT_VALIDATION = 3
EXIT_NO_RANKING = 4
EXIT_IO = 5


class NoRankingError(RuntimeError):
    def __init__(self, spec: NetworkSpec, prefix):
        self.prefix = tuple(prefix or ())
        names = [spec.job_names[j] for j in self.prefix]
        super().__init__(f"no viable ranking; search is stuck after prefix {names}")


class _ValidationFailed(RuntimeError):
    pass


# --- CSV ---------------------------------------------------------------------

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(header: Sequence[str], rows: Sequence[Sequence], path: str | None = None) -> str:
    """Write rows with full float precision; returns the text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    text = buf.getvalue()
    if path and path != "-":
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def _parse_cell(s: str):
    if s == "":
        return None
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def read_csv(path_or_text: str, *, text: bool = False) -> tuple[list[str], list[list]]:
    src = io.StringIO(path_or_text) if text else open(path_or_text, newline="")
    with src:
        rows = list(csv.reader(src))
    return rows[0], [[_parse_cell(c) for c in row] for row in rows[1:]]


# --- helpers -----------------------------------------------------------------

def load_net(name: str) -> NetworkSpec:
    """A built-in fixture name or a JSON/YAML file."""
    if name in BUILTIN:
        return BUILTIN[name]()
    return load_network(name)


def _require_valid(spec: NetworkSpec) -> None:
    report = validate(spec)
    if not report.ok:
        raise _ValidationFailed("network is invalid: " + ", ".join(report.violations))


def _ranking_or_fail(spec: NetworkSpec, cls=None):
    cls = cls or classify(spec)
    rk = find_viable_ranking(spec, cls)
    if rk is None:
        raise NoRankingError(spec, stuck_prefix(spec, cls))
    return rk


def _numbers(text: str | None, conv=Fraction) -> list:
    if text is None:
        return []
    return [conv(t) for t in text.replace(",", " ").split()]


def _idle_cols(spec: NetworkSpec) -> list[str]:
    return [f"idleness_{i + 1}" for i in range(spec.I)]


# --- sweep -------------------------------------------------------------------

@dataclass
class SweepConfig:
    net: str
    r_values: list = field(default_factory=list)
    T: float = 200.0
    theta: float = 1.0
    reps: int = 20
    seed: int = 0
    params: PolicyParams = field(default_factory=PolicyParams)
    out: str | None = None
    q0: Sequence[int] | None = None
    hgi_dt: float = 1e-3
    hgi_horizon: float = 200.0
    hgi_reps: int = 4
    workers: int | None = None
    gap: bool = False

    def __post_init__(self):
        rv = [Fraction(r) for r in self.r_values]
        if any(b <= a for a, b in zip(rv, rv[1:])):
            raise ValueError("r_values must be strictly increasing")
        if any(r <= 0 for r in rv):
            raise ValueError("r_values must be positive")
        if self.T <= 0 or self.theta <= 0 or self.reps < 1:
            raise ValueError("need T > 0, theta > 0 and reps >= 1")


def sweep_header(spec: NetworkSpec) -> list[str]:
    return (["kind", "r", "J_E", "J_E_stderr", "J_D", "J_D_stderr", "events"]
            + _idle_cols(spec) + ["gap", "gap_bound"])


def report_gap(spec: NetworkSpec, params: PolicyParams, results: Sequence[SimResult],
               q0: Sequence[int] | None = None) -> tuple[float, float]:
    """Mean of |avg h.Q_hat - avg C(W_tilde)| over replications, and its bound.

    The bound is ``B r^(alpha - 1/2) (1 + |q0_hat|^2)``.
    """
    if not results or results[0].avg_workload_cost is None:
        raise ValueError("results were produced without gap tracking")
    r = results[0].r
    gap = sum(abs(res.avg_holding - res.avg_workload_cost) for res in results) / len(results)
    qhat = [v / r for v in (q0 or [0] * spec.J)]
    bound = float(inefficiency_constant(spec)) * r ** (params.alpha - 0.5) * (1 + sum(v * v for v in qhat))
    return gap, bound


def run_sweep(config: SweepConfig) -> tuple[list[str], list[list]]:
    """Simulate every r, then append one reference row from the diffusion model."""
    spec = load_net(config.net)
    _require_valid(spec)
    cls = classify(spec)
    rk = _ranking_or_fail(spec, cls)
    rows = []
    for r in config.r_values:
        rep = simulate_replications(
            spec, rk, config.params, r=r, T=config.T, theta=config.theta, reps=config.reps,
            seed=config.seed, q0=config.q0, workers=config.workers, track_gap=config.gap,
        )
        gap = bound = None
        if config.gap:
            gap, bound = report_gap(spec, config.params, rep.replications, config.q0)
        stderr = lambda v: None if math.isnan(v) else v
        rows.append(["sim", rep.r, rep.J_E, stderr(rep.J_E_stderr), rep.J_D, stderr(rep.J_D_stderr),
                     rep.events, *[float(v) for v in rep.idleness], gap, bound])
    rbm = RbmConfig(dt=config.hgi_dt, horizon=config.hgi_horizon, seed=config.seed, reps=config.hgi_reps)
    erg = hgi_ergodic(spec, rbm)
    w0 = [0.0] * spec.I
    disc = hgi_discounted(spec, w0, config.theta, rbm)
    rows.append(["hgi", None, erg.mean, erg.stderr, disc.mean, disc.stderr, None,
                 *([None] * spec.I), None, None])
    header = sweep_header(spec)
    if config.out:
        write_csv(header, rows, config.out)
    return header, rows


# --- subcommands -------------------------------------------------------------

def _params(args) -> PolicyParams:
    return PolicyParams(alpha=args.alpha, c1=args.c1, c2=args.c2)


def cmd_validate(args, out) -> int:
    spec = load_net(args.net)
    report = validate(spec)
    if report.ok:
        print("ok", file=out)
        return EXIT_OK
    for v in report.violations:
        print(f"violation: {v}", file=out)
    return EXIT_VALIDATION


def cmd_classify(args, out) -> int:
    spec = load_net(args.net)
    _require_valid(spec)
    cls = classify(spec)
    names = lambda js: sorted(spec.job_names[j] for j in js)
    print(json.dumps({
        "singles": names(cls.singles),
        "primary": names(cls.primary),
        "secondary": names(cls.secondary),
        "multi_secondary": names(cls.multi),
    }), file=out)
    return EXIT_OK


def cmd_rank(args, out) -> int:
    spec = load_net(args.net)
    _require_valid(spec)
    cls = classify(spec)
    if args.all:
        ranks = all_viable_rankings(spec, cls)
        if not ranks:
            raise NoRankingError(spec, stuck_prefix(spec, cls))
        for rk in ranks:
            print(" ".join(rk.names(spec)) or "(empty)", file=out)
        return EXIT_OK
    rk = _ranking_or_fail(spec, cls)
    print(" ".join(rk.names(spec)) or "(empty)", file=out)
    return EXIT_OK


def cmd_cost(args, out) -> int:
    spec = load_net(args.net)
    _require_valid(spec)
    w = _numbers(args.w)
    rk = find_viable_ranking(spec) if args.greedy else None
    sol = lp_min_cost(spec, w, ranking=rk)
    print(f"cost {sol.value}", file=out)
    print("q " + " ".join(f"{n}={v}" for n, v in zip(spec.job_names, sol.q)), file=out)
    return EXIT_OK


def cmd_rates(args, out) -> int:
    spec = load_net(args.net)
    _require_valid(spec)
    rk = _ranking_or_fail(spec)
    params = _params(args)
    Q = tuple(int(v) for v in _numbers(args.q, int)) or (0,) * spec.J
    r = Fraction(args.r)
    if args.e is None:
        lo, _ = thresholds(params, r)
        E = tuple(1 if q < lo else 0 for q in Q)
    else:
        E = tuple(int(v) for v in _numbers(args.e, int))
    if len(Q) != spec.J or len(E) != spec.J:
        raise ValueError(f"--q and --e need {spec.J} entries")
    policy = ThresholdPolicy(spec, rk, params)
    y, x, sigma, varpi = policy.allocation(ControlState(Q, E, r))
    print("y " + " ".join(f"{n}={v}" for n, v in zip(spec.job_names, y)), file=out)
    print("x " + " ".join(f"{n}={v}" for n, v in zip(spec.job_names, x)), file=out)
    print("sigma " + " ".join(sorted(spec.job_names[j] for j in sigma)), file=out)
    print("varpi " + " ".join(sorted(spec.resource_names[i] for i in varpi)), file=out)
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    spec = load_net(args.net)
    _require_valid(spec)
    rk = _ranking_or_fail(spec)
    q0 = [int(v) for v in _numbers(args.q0, int)] or None
    rep = simulate_replications(spec, rk, _params(args), r=Fraction(args.r), T=args.T,
                                theta=args.theta, reps=args.reps, seed=args.seed, q0=q0)
    header = ["r", "rep", "seed", "J_E", "J_D", "events", *_idle_cols(spec), "wallclock_s"]
    rows = [[res.r, res.rep, res.seed, res.J_E, res.J_D, res.events, *res.idleness,
             res.wallclock_s if args.timing else None] for res in rep.replications]
    text = write_csv(header, rows, args.out)
    if not args.out or args.out == "-":
        out.write(text)
    return EXIT_OK


def cmd_hgi(args, out) -> int:
    spec = load_net(args.net)
    _require_valid(spec)
    cfg = RbmConfig(dt=args.dt, horizon=args.horizon, seed=args.seed, reps=args.reps,
                    burn_in=args.burn_in)
    if args.mode == "ergodic":
        est = hgi_ergodic(spec, cfg)
        tail = None
    else:
        w0 = [float(v) for v in _numbers(args.w0, float)] or [0.0] * spec.I
        est = hgi_discounted(spec, w0, args.theta, cfg)
        tail = est.tail
    header = ["mode", "mean", "stderr", "tail", "reps"]
    text = write_csv(header, [[args.mode, est.mean, est.stderr, tail, len(est.values)]], args.out)
    if not args.out or args.out == "-":
        out.write(text)
    return EXIT_OK


def cmd_sweep(args, out) -> int:
    cfg = SweepConfig(
        net=args.net, r_values=[Fraction(v) for v in _numbers(args.r_values)], T=args.T,
        theta=args.theta, reps=args.reps, seed=args.seed, params=_params(args), out=args.out,
        q0=[int(v) for v in _numbers(args.q0, int)] or None, hgi_dt=args.hgi_dt,
        hgi_horizon=args.hgi_horizon, hgi_reps=args.hgi_reps, gap=args.gap,
    )
    header, rows = run_sweep(cfg)
    if not args.out or args.out == "-":
        out.write(write_csv(header, rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hgi-policy", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, policy=False):
        sp.add_argument("--net", required=True, help="network file (JSON/YAML) or built-in name")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=None)
        if policy:
            sp.add_argument("--alpha", type=float, default=PolicyParams.alpha)
            sp.add_argument("--c1", type=float, default=PolicyParams.c1)
            sp.add_argument("--c2", type=float, default=PolicyParams.c2)

    common(sub.add_parser("validate", help="check the standing assumptions"))
    common(sub.add_parser("classify", help="primary / secondary split"))
    sp = sub.add_parser("rank", help="first viable ranking")
    common(sp)
    sp.add_argument("--all", action="store_true", help="list every viable ranking")
    sp = sub.add_parser("cost", help="workload cost of a workload vector")
    common(sp)
    sp.add_argument("--w", required=True, help="workload entries, rationals allowed")
    sp.add_argument("--greedy", action="store_true", help="report the ranking-based minimiser")
    sp = sub.add_parser("rates", help="policy allocation in one state")
    common(sp, policy=True)
    sp.add_argument("--q", default=None)
    sp.add_argument("--e", default=None)
    sp.add_argument("--r", default="1")
    sp = sub.add_parser("simulate", help="replicated simulation at one r")
    common(sp, policy=True)
    sp.add_argument("--r", default="16")
    sp.add_argument("--T", type=float, default=1.0)
    sp.add_argument("--theta", type=float, default=1.0)
    sp.add_argument("--reps", type=int, default=1)
    sp.add_argument("--q0", default=None)
    sp.add_argument("--timing", action="store_true", help="fill the wallclock_s column")
    sp = sub.add_parser("hgi", help="reference cost of the reflected workload")
    common(sp)
    sp.add_argument("--mode", choices=["ergodic", "discounted"], default="ergodic")
    sp.add_argument("--w0", default=None)
    sp.add_argument("--theta", type=float, default=1.0)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--horizon", type=float, default=100.0)
    sp.add_argument("--burn-in", dest="burn_in", type=float, default=None)
    sp.add_argument("--reps", type=int, default=4)
    sp = sub.add_parser("sweep", help="simulate a list of r values plus a reference row")
    common(sp, policy=True)
    sp.add_argument("--r-values", dest="r_values", default="4 8 16 32")
    sp.add_argument("--T", type=float, default=200.0)
    sp.add_argument("--theta", type=float, default=1.0)
    sp.add_argument("--reps", type=int, default=20)
    sp.add_argument("--q0", default=None)
    sp.add_argument("--hgi-dt", dest="hgi_dt", type=float, default=1e-3)
    sp.add_argument("--hgi-horizon", dest="hgi_horizon", type=float, default=200.0)
    sp.add_argument("--hgi-reps", dest="hgi_reps", type=int, default=4)
    sp.add_argument("--gap", action="store_true", help="add holding vs workload cost gap columns")
    return p


_COMMANDS = {
    "validate": cmd_validate, "classify": cmd_classify, "rank": cmd_rank, "cost": cmd_cost,
    "rates": cmd_rates, "simulate": cmd_simulate, "hgi": cmd_hgi, "sweep": cmd_sweep,
}


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args, out)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except _ValidationFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NoRankingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_RANKING
    except (ValueError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
