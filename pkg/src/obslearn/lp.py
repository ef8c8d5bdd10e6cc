"""Exact linear programming over the rationals.

A dense two-phase tableau simplex with Bland's rule.  Problems are

    optimize  c @ x   subject to  A_ub @ x <= b_ub,  A_eq @ x == b_eq,  x >= 0.

Infeasible problems come with a Farkas certificate (y >= 0, z free) such that
``A_ub.T @ y + A_eq.T @ z >= 0`` and ``b_ub @ y + b_eq @ z < 0``; it is
checked exactly before being returned.  The problems met here have at most a
few dozen rows, so exact arithmetic is cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

Number = int | float | Fraction


def F(x: Number) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass
class LPResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    x: list[Fraction] | None = None
    value: Fraction | None = None
    farkas_ub: list[Fraction] | None = None
    farkas_eq: list[Fraction] | None = None


def _pivot(T: list[list[Fraction]], r: int, c: int) -> None:
    piv = T[r][c]
    row = [v / piv for v in T[r]]
    T[r] = row
    for i, other in enumerate(T):
        if i != r and other[c] != 0:
            f = other[c]
            T[i] = [a - f * b for a, b in zip(other, row)]


def _simplex(T: list[list[Fraction]], basis: list[int], allowed: set[int]) -> bool:
    """Minimize the objective stored in the last row; False means unbounded."""
    m = len(T) - 1
    while True:
        obj = T[-1]
        enter = next((j for j in sorted(allowed) if obj[j] < 0), None)
        if enter is None:
            return True
        best, leave = None, None
        for i in range(m):
            a = T[i][enter]
            if a > 0:
                ratio = T[i][-1] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave is None:
            return False
        _pivot(T, leave, enter)
        basis[leave] = enter


def solve(c: Sequence[Number], A_ub: Sequence[Sequence[Number]] = (), b_ub: Sequence[Number] = (),
          A_eq: Sequence[Sequence[Number]] = (), b_eq: Sequence[Number] = (),
          maximize: bool = False) -> LPResult:
    n = len(c)
    rows = [[F(v) for v in r] for r in A_ub] + [[F(v) for v in r] for r in A_eq]
    rhs = [F(v) for v in b_ub] + [F(v) for v in b_eq]
    n_ub, m = len(A_ub), len(rows)
    if any(len(r) != n for r in rows):
        raise ValueError("constraint rows must match the number of variables")
    sign = [Fraction(-1) if b < 0 else Fraction(1) for b in rhs]
    # columns: x (n) | slacks (n_ub) | artificials (m) | rhs
    width = n + n_ub + m
    T = []
    for i in range(m):
        slack = [Fraction(0)] * n_ub
        if i < n_ub:
            slack[i] = sign[i]
        art = [Fraction(0)] * m
        art[i] = Fraction(1)
        T.append([sign[i] * v for v in rows[i]] + slack + art + [sign[i] * rhs[i]])
    phase1 = [Fraction(0)] * (n + n_ub) + [Fraction(1)] * m + [Fraction(0)]
    for i in range(m):
        phase1 = [a - b for a, b in zip(phase1, T[i])]
    T.append(phase1)
    basis = [n + n_ub + i for i in range(m)]
    _simplex(T, basis, set(range(width)))
    if -T[-1][-1] > 0:
        # reduced cost of artificial i is 1 - w_i, with w the phase-one duals
        w = [Fraction(1) - T[-1][n + n_ub + i] for i in range(m)]
        y = [-w[i] * sign[i] for i in range(m)]
        res = LPResult("infeasible", farkas_ub=y[:n_ub], farkas_eq=y[n_ub:])
        if not verify_farkas(A_ub, b_ub, A_eq, b_eq, res.farkas_ub, res.farkas_eq):
            raise ArithmeticError("Farkas certificate failed exact verification")
        return res
    # drive remaining artificials out of the basis
    keep = []
    for i in range(m):
        if basis[i] >= n + n_ub:
            j = next((j for j in range(n + n_ub) if T[i][j] != 0), None)
            if j is None:
                continue  # redundant row
            _pivot(T, i, j)
            basis[i] = j
        keep.append(i)
    T = [T[i][: n + n_ub] + [T[i][-1]] for i in keep]
    basis = [basis[i] for i in keep]
    cost = [(-F(v) if maximize else F(v)) for v in c] + [Fraction(0)] * n_ub
    obj = cost + [Fraction(0)]
    for i, b in enumerate(basis):
        if cost[b] != 0:
            obj = [a - cost[b] * t for a, t in zip(obj, T[i])]
    T.append(obj)
    if not _simplex(T, basis, set(range(n + n_ub))):
        return LPResult("unbounded")
    x = [Fraction(0)] * (n + n_ub)
    for i, b in enumerate(basis):
        x[b] = T[i][-1]
    val = sum((F(ci) * xi for ci, xi in zip(c, x[:n])), Fraction(0))
    return LPResult("optimal", x=x[:n], value=val)


def verify_farkas(A_ub, b_ub, A_eq, b_eq, y, z) -> bool:
    """Exact check that (y, z) proves the constraint system has no solution."""
    if any(v < 0 for v in y):
        return False
    n = len(A_ub[0]) if len(A_ub) else (len(A_eq[0]) if len(A_eq) else 0)
    for j in range(n):
        col = sum((F(A_ub[i][j]) * y[i] for i in range(len(A_ub))), Fraction(0))
        col += sum((F(A_eq[i][j]) * z[i] for i in range(len(A_eq))), Fraction(0))
        if col < 0:
            return False
    rhs = sum((F(b) * v for b, v in zip(b_ub, y)), Fraction(0)) + sum((F(b) * v for b, v in zip(b_eq, z)), Fraction(0))
    return rhs < 0


def verify_feasible(x, A_ub, b_ub, A_eq, b_eq) -> bool:
    if any(v < 0 for v in x):
        return False
    dot = lambda row: sum((F(a) * v for a, v in zip(row, x)), Fraction(0))
    return all(dot(r) <= F(b) for r, b in zip(A_ub, b_ub)) and all(dot(r) == F(b) for r, b in zip(A_eq, b_eq))
