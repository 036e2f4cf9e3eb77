"""Exact two-phase simplex over the rationals with certificates.

Variables are free (internally split into nonnegative pairs).  Right-hand
sides may be rational or log-linear scalars; pivoting only multiplies them
by rationals, so exactness is preserved and every comparison is decided by
the scalar layer.  Bland's rule guarantees termination.  Strict
inequalities go through the interior-point trick (maximize a slack bounded
by 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from ..scalars import Scalar, rat, sign_of
from .linalg import Vec, vec, zeros

LE, LT, EQ = "le", "lt", "eq"


@dataclass(frozen=True)
class Row:
    coeffs: Vec
    rhs: Scalar
    kind: str  # le | lt | eq

    def __post_init__(self):
        if self.kind not in (LE, LT, EQ):
            raise ValueError(f"bad row kind {self.kind}")


@dataclass
class LPResult:
    status: str  # optimal | unbounded | infeasible
    value: Optional[Scalar] = None
    point: Optional[tuple[Scalar, ...]] = None
    ray: Optional[Vec] = None               # improving direction if unbounded
    farkas: Optional[list[Scalar]] = None   # y: sum y_i a_i = 0, sum y_i b_i < 0


def _smul(s: Scalar, f: Fraction) -> Scalar:
    return s * f


class _Tableau:
    def __init__(self, dim: int, rows: Sequence[Row]):
        self.dim = dim
        self.n_le = sum(1 for r in rows if r.kind == LE)
        m = len(rows)
        self.ncols = 2 * dim + self.n_le + m
        self.art0 = 2 * dim + self.n_le
        self.A: list[list[Fraction]] = []
        self.b: list[Scalar] = []
        self.sigma: list[int] = []
        slack_i = 0
        for i, row in enumerate(rows):
            line = [Fraction(0)] * self.ncols
            for j, c in enumerate(row.coeffs):
                line[j] = rat(c)
                line[dim + j] = -rat(c)
            if row.kind == LE:
                line[2 * dim + slack_i] = Fraction(1)
                slack_i += 1
            sgn = 1
            rhs = row.rhs
            if sign_of(rhs) < 0:
                sgn = -1
                line = [-x for x in line]
                rhs = -rhs
            line[self.art0 + i] = Fraction(1)
            self.A.append(line)
            self.b.append(rhs)
            self.sigma.append(sgn)
        self.basis = [self.art0 + i for i in range(m)]

    def pivot(self, r: int, c: int):
        pv = self.A[r][c]
        inv = Fraction(1) / pv
        self.A[r] = [x * inv for x in self.A[r]]
        self.b[r] = _smul(self.b[r], inv)
        for i in range(len(self.A)):
            if i != r and self.A[i][c] != 0:
                f = self.A[i][c]
                self.A[i] = [x - f * y for x, y in zip(self.A[i], self.A[r])]
                self.b[i] = self.b[i] - _smul(self.b[r], f)
        self.basis[r] = c

    def run(self, cost: list[Fraction], allowed: int) -> str:
        """Maximize cost over columns [0, allowed); Bland's rule."""
        while True:
            cb = [(i, cost[j]) for i, j in enumerate(self.basis) if cost[j] != 0]
            enter = -1
            for j in range(allowed):
                v = cost[j]
                for i, cbi in cb:
                    aij = self.A[i][j]
                    if aij != 0:
                        v -= cbi * aij
                if v > 0:
                    enter = j
                    break
            if enter < 0:
                return "optimal"
            leave = -1
            best: Optional[Scalar] = None
            for i in range(len(self.A)):
                a = self.A[i][enter]
                if a > 0:
                    ratio = _smul(self.b[i], Fraction(1) / a)
                    if best is None:
                        best, leave = ratio, i
                    else:
                        s = sign_of(ratio - best)
                        if s < 0 or (s == 0 and self.basis[i] < self.basis[leave]):
                            best, leave = ratio, i
            if leave < 0:
                self._enter_col = enter
                return "unbounded"
            self.pivot(leave, enter)

    def objective_value(self, cost: list[Fraction]) -> Scalar:
        out: Scalar = Fraction(0)
        for i, j in enumerate(self.basis):
            if cost[j] != 0:
                out = out + _smul(self.b[i], cost[j])
        return out

    def x_point(self) -> tuple[Scalar, ...]:
        z: list[Scalar] = [Fraction(0)] * self.ncols
        for i, j in enumerate(self.basis):
            z[j] = self.b[i]
        return tuple(z[j] - z[self.dim + j] for j in range(self.dim))

    def x_ray(self, enter: int) -> Vec:
        dz = [Fraction(0)] * self.ncols
        dz[enter] = Fraction(1)
        for i, j in enumerate(self.basis):
            dz[j] = -self.A[i][enter]
        return tuple(dz[j] - dz[self.dim + j] for j in range(self.dim))

    def dual_phase1(self, cost1: list[Fraction], m: int) -> list[Scalar]:
        """y = c_B B^{-1}, read off the artificial columns."""
        out: list[Scalar] = []
        for i in range(m):
            yi: Scalar = Fraction(0)
            for k, jb in enumerate(self.basis):
                if cost1[jb] != 0 and self.A[k][self.art0 + i] != 0:
                    yi = yi + Fraction(cost1[jb]) * self.A[k][self.art0 + i]
            out.append(yi)
        return out


def solve_lp(dim: int, rows: Sequence[Row], objective: Vec,
             maximize: bool = True) -> LPResult:
    """Exact LP over free variables with le/eq rows (no strict rows)."""
    if any(r.kind == LT for r in rows):
        raise ValueError("strict rows go through strict_feasible_point")
    obj = vec(objective) if maximize else tuple(-rat(c) for c in objective)
    if not rows:
        if all(c == 0 for c in obj):
            return LPResult("optimal", value=Fraction(0), point=zeros(dim))
        ray = tuple(Fraction(1) if c > 0 else (Fraction(-1) if c < 0 else Fraction(0)) for c in obj)
        return LPResult("unbounded", point=zeros(dim), ray=ray)

    tab = _Tableau(dim, rows)
    m = len(rows)
    cost1 = [Fraction(0)] * tab.ncols
    for i in range(m):
        cost1[tab.art0 + i] = Fraction(-1)
    tab.run(cost1, tab.ncols)
    if sign_of(tab.objective_value(cost1)) < 0:
        yraw = tab.dual_phase1(cost1, m)
        farkas = [_smul(yi, Fraction(tab.sigma[i])) for i, yi in enumerate(yraw)]
        _check_farkas(dim, rows, farkas)
        return LPResult("infeasible", farkas=farkas)

    for i in range(m):
        if tab.basis[i] >= tab.art0:
            piv = next((c for c in range(tab.art0) if tab.A[i][c] != 0), None)
            if piv is not None:
                tab.pivot(i, piv)

    cost2 = [Fraction(0)] * tab.ncols
    for j in range(dim):
        cost2[j] = obj[j]
        cost2[dim + j] = -obj[j]
    status = tab.run(cost2, tab.art0)
    if status == "unbounded":
        ray = tab.x_ray(tab._enter_col)
        return LPResult("unbounded", point=tab.x_point(), ray=ray)
    val = tab.objective_value(cost2)
    if not maximize:
        val = -val
    return LPResult("optimal", value=val, point=tab.x_point())


def _check_farkas(dim: int, rows: Sequence[Row], y: list[Scalar]):
    comb: list[Scalar] = [Fraction(0)] * dim
    tot: Scalar = Fraction(0)
    for row, yi in zip(rows, y):
        if row.kind != EQ and sign_of(yi) < 0:
            raise AssertionError("farkas multiplier sign")
        for j, c in enumerate(row.coeffs):
            if c != 0:
                comb[j] = comb[j] + _smul(yi, c)
        if isinstance(row.rhs, Fraction):
            tot = tot + _smul(yi, row.rhs)
        else:
            if not isinstance(yi, Fraction):
                raise AssertionError("unexpected certificate shape")
            tot = tot + _smul(row.rhs, yi)
    if any(sign_of(c) != 0 for c in comb) or sign_of(tot) >= 0:
        raise AssertionError("invalid infeasibility certificate")


def feasible_point(dim: int, rows: Sequence[Row]) -> Optional[tuple[Scalar, ...]]:
    res = solve_lp(dim, list(rows), zeros(dim))
    return None if res.status == "infeasible" else res.point


def strict_feasible_point(dim: int, rows: Sequence[Row]) -> Optional[tuple[Scalar, ...]]:
    """A point meeting eq/le rows and lt rows strictly; None if impossible."""
    if not any(r.kind == LT for r in rows):
        return feasible_point(dim, rows)
    ext: list[Row] = []
    for r in rows:
        pad = Fraction(1) if r.kind == LT else Fraction(0)
        ext.append(Row(tuple(list(r.coeffs) + [pad]), r.rhs, LE if r.kind == LT else r.kind))
    ext.append(Row(tuple([Fraction(0)] * dim + [Fraction(1)]), Fraction(1), LE))
    res = solve_lp(dim + 1, ext, tuple([Fraction(0)] * dim + [Fraction(1)]))
    if res.status == "infeasible":
        return None
    if res.status == "optimal" and sign_of(res.value) <= 0:
        return None
    assert res.point is not None
    return res.point[:dim]
