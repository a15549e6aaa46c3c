"""Dense two-phase simplex over exact rationals (or floats).

Problems here are tiny (a handful of rows, at most a few dozen columns), so
the tableau is a list of lists and Bland's rule is used throughout to rule
out cycling.  The same code runs on :class:`~fractions.Fraction` entries
(``eps=0``) or on floats with an absolute tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

__all__ = ["LPInfeasible", "LPUnbounded", "LPResult", "solve_standard_form"]

FLOAT_TOL = 1e-9


class LPInfeasible(ValueError):
    pass


class LPUnbounded(ValueError):
    pass


@dataclass
class LPResult:
    x: list
    value: object
    basis: list[int]


class _Tableau:
    def __init__(self, rows, rhs, basis, eps):
        self.rows = rows      # m lists of length n
        self.rhs = rhs        # m entries
        self.basis = basis    # m column indices
        self.eps = eps

    def pivot(self, r: int, col: int) -> None:
        rows, rhs = self.rows, self.rhs
        prow = rows[r]
        p = prow[col]
        if p != 1:
            prow[:] = [v / p for v in prow]
            rhs[r] = rhs[r] / p
        for k, row in enumerate(rows):
            if k == r:
                continue
            f = row[col]
            if f:
                row[:] = [a - f * b for a, b in zip(row, prow)]
                rhs[k] = rhs[k] - f * rhs[r]
        self.basis[r] = col

    def reduced_costs(self, c):
        n = len(c)
        red = list(c)
        for r, b in enumerate(self.basis):
            cb = c[b]
            if cb:
                row = self.rows[r]
                for j in range(n):
                    if row[j]:
                        red[j] -= cb * row[j]
        return red

    def optimise(self, c, allowed: int) -> None:
        """Bland's rule on columns ``0..allowed-1``."""
        eps = self.eps
        while True:
            red = self.reduced_costs(c)
            enter = next((j for j in range(allowed) if red[j] < -eps), None)
            if enter is None:
                return
            best = None
            for r, row in enumerate(self.rows):
                a = row[enter]
                if a > eps:
                    ratio = self.rhs[r] / a
                    key = (ratio, self.basis[r])
                    if best is None or _ratio_less(key, best[0], eps):
                        best = (key, r)
            if best is None:
                raise LPUnbounded("objective unbounded below")
            self.pivot(best[1], enter)


def _ratio_less(a, b, eps) -> bool:
    # lexicographic on (ratio, basis index) with a tolerance on the ratio
    if a[0] < b[0] - eps:
        return True
    if a[0] > b[0] + eps:
        return False
    return a[1] < b[1]


def solve_standard_form(
    c: Sequence,
    A: Sequence[Sequence],
    b: Sequence,
    *,
    exact: bool = True,
    basis: Sequence[int] | None = None,
) -> LPResult:
    """Minimise ``c @ x`` subject to ``A x = b`` and ``x >= 0``.

    ``b`` must be nonnegative.  If ``basis`` names m columns forming a
    feasible basis, phase one is skipped.  Raises :class:`LPInfeasible` or
    :class:`LPUnbounded`.
    """
    conv = Fraction if exact else float
    eps = 0 if exact else FLOAT_TOL
    m, n = len(A), len(c)
    c = [conv(v) for v in c]
    rows = [[conv(v) for v in row] for row in A]
    rhs = [conv(v) for v in b]
    if any(len(row) != n for row in rows) or len(rhs) != m:
        raise ValueError("inconsistent LP dimensions")
    if any(v < -eps for v in rhs):
        raise ValueError("right-hand side must be nonnegative")

    if basis is not None:
        tab = _Tableau(rows, rhs, list(basis), eps)
        for r, col in enumerate(basis):
            if abs(tab.rows[r][col]) <= eps:
                raise ValueError("supplied basis is singular")
            tab.pivot(r, col)
        if any(v < -eps for v in tab.rhs):
            raise ValueError("supplied basis is not primal feasible")
    else:
        zero, one = conv(0), conv(1)
        for r in range(m):
            rows[r] = rows[r] + [one if k == r else zero for k in range(m)]
        tab = _Tableau(rows, rhs, [n + r for r in range(m)], eps)
        tab.optimise([zero] * n + [one] * m, n + m)
        if sum(tab.rhs[r] for r in range(m) if tab.basis[r] >= n) > eps:
            raise LPInfeasible("no nonnegative solution of A x = b")
        # drive artificial variables out of the basis, dropping redundant rows
        r = 0
        while r < len(tab.rows):
            if tab.basis[r] >= n:
                col = next((j for j in range(n) if abs(tab.rows[r][j]) > eps), None)
                if col is None:
                    del tab.rows[r], tab.rhs[r], tab.basis[r]
                    continue
                tab.pivot(r, col)
            r += 1
        tab.rows = [row[:n] for row in tab.rows]

    tab.optimise(c, n)
    x = [conv(0)] * n
    for r, col in enumerate(tab.basis):
        x[col] = tab.rhs[r]
    if not exact:
        x = [0.0 if abs(v) <= eps else v for v in x]
    value = sum((ci * xi for ci, xi in zip(c, x)), conv(0))
    return LPResult(x=x, value=value, basis=list(tab.basis))
