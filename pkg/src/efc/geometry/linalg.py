"""Exact rational vectors, Gaussian elimination and affine flats."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from ..scalars import rat

Vec = tuple[Fraction, ...]


def vec(xs: Iterable) -> Vec:
    return tuple(rat(x) for x in xs)


def zeros(d: int) -> Vec:
    return tuple(Fraction(0) for _ in range(d))


def add(a: Vec, b: Vec) -> Vec:
    return tuple(x + y for x, y in zip(a, b, strict=True))


def sub(a: Vec, b: Vec) -> Vec:
    return tuple(x - y for x, y in zip(a, b, strict=True))


def scale(a: Vec, f: Fraction) -> Vec:
    return tuple(x * f for x in a)


def dot(a: Vec, b: Vec) -> Fraction:
    return sum((x * y for x, y in zip(a, b, strict=True)), Fraction(0))


def is_zero(a: Vec) -> bool:
    return all(x == 0 for x in a)


def norm_sq(a: Vec) -> Fraction:
    return dot(a, a)


def primitive(a: Vec) -> Vec:
    """Scale to coprime integers, preserving direction."""
    from math import gcd, lcm

    if is_zero(a):
        return a
    denom = lcm(*(x.denominator for x in a))
    ints = [int(x * denom) for x in a]
    g = 0
    for v in ints:
        g = gcd(g, abs(v))
    return tuple(Fraction(v, g) for v in ints)


def rref(rows: list[list[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form; returns (rows, pivot column indices)."""
    rows = [list(r) for r in rows]
    m = len(rows)
    n = len(rows[0]) if m else 0
    pivots: list[int] = []
    r = 0
    for c in range(n):
        pivot = next((i for i in range(r, m) if rows[i][c] != 0), None)
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        pv = rows[r][c]
        rows[r] = [x / pv for x in rows[r]]
        for i in range(m):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == m:
            break
    return rows[:r] + rows[r:], pivots


def rank(vectors: Sequence[Vec]) -> int:
    if not vectors:
        return 0
    _, pivots = rref([list(v) for v in vectors])
    return len(pivots)


def independent_subset(vectors: Sequence[Vec]) -> list[Vec]:
    """Greedy maximal linearly independent subset, order-stable."""
    basis: list[Vec] = []
    for v in vectors:
        if is_zero(v):
            continue
        if rank(basis + [v]) > len(basis):
            basis.append(v)
    return basis


def solve(mat: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction]) -> Optional[list[Fraction]]:
    """One solution of mat @ x = rhs, or None if inconsistent."""
    m = len(mat)
    if m == 0:
        return []
    n = len(mat[0])
    aug = [list(mat[i]) + [rat(rhs[i])] for i in range(m)]
    red, pivots = rref(aug)
    for row in red:
        if all(x == 0 for x in row[:n]) and row[n] != 0:
            return None
    x = [Fraction(0)] * n
    for i, c in enumerate(pivots):
        if c == n:
            return None
        x[c] = red[i][n]
    return x


def nullspace(vectors: Sequence[Vec], dim: int) -> list[Vec]:
    """Basis of {x : <v, x> = 0 for all v}."""
    if not vectors:
        return [tuple(Fraction(1 if i == j else 0) for j in range(dim)) for i in range(dim)]
    red, pivots = rref([list(v) for v in vectors])
    pivset = set(pivots)
    free = [c for c in range(dim) if c not in pivset]
    basis = []
    for fc in free:
        x = [Fraction(0)] * dim
        x[fc] = Fraction(1)
        for i, pc in enumerate(pivots):
            x[pc] = -red[i][fc]
        basis.append(tuple(x))
    return basis


def in_span(v: Vec, basis: Sequence[Vec]) -> bool:
    if is_zero(v):
        return True
    if not basis:
        return False
    cols = [[b[i] for b in basis] for i in range(len(v))]
    return solve(cols, list(v)) is not None


@dataclass(frozen=True)
class AffineFlat:
    """Affine subspace given by a base point and an independent basis of
    its direction space; the empty basis is a single point."""

    base: Vec
    basis: tuple[Vec, ...]

    def __post_init__(self):
        if len(self.basis) != len(independent_subset(list(self.basis))):
            raise ValueError("flat basis must be linearly independent")

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def ambient_dim(self) -> int:
        return len(self.base)

    def contains(self, x: Vec) -> bool:
        return in_span(sub(x, self.base), self.basis)

    def lin_contains(self, v: Vec) -> bool:
        return in_span(v, self.basis)

    def normals(self) -> list[Vec]:
        """Basis of the orthogonal complement of the direction space."""
        return nullspace(list(self.basis), len(self.base))

    def equations(self) -> list[tuple[Vec, Fraction]]:
        """Equality system <n, x> = <n, base> cutting out the flat."""
        return [(n, dot(n, self.base)) for n in self.normals()]


def affine_hull(points: Sequence[Vec], rays: Sequence[Vec] = ()) -> AffineFlat:
    """Smallest affine flat containing the points, closed under the rays."""
    if not points:
        raise ValueError("affine hull needs at least one point")
    base = points[0]
    dirs = [sub(p, base) for p in points[1:]] + [vec(r) for r in rays]
    return AffineFlat(base, tuple(independent_subset(dirs)))


def project_onto_span(v: Vec, basis: Sequence[Vec]) -> Vec:
    """Exact orthogonal projection of v onto span(basis)."""
    if not basis:
        return zeros(len(v))
    gram = [[dot(bi, bj) for bj in basis] for bi in basis]
    rhs = [dot(bi, v) for bi in basis]
    coef = solve(gram, rhs)
    assert coef is not None  # Gram matrix of independent vectors is regular
    out = zeros(len(v))
    for c, b in zip(coef, basis):
        out = add(out, scale(b, c))
    return out


def project(v: Vec, flat: AffineFlat) -> Vec:
    return project_onto_span(v, flat.basis)
