"""Rational H-polyhedra with optional strict facets and exact queries.

Normals and points are rational; offsets may be log-linear scalars (they
arise from log-partition domain halfspaces).  All structural decisions
(emptiness, implicit equalities, redundancy, face enumeration, projections,
recession cones, relative interiors) are made by exact LPs.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from ..scalars import Scalar, rat, sign_of
from . import linalg
from .linalg import (AffineFlat, Vec, add, dot, independent_subset, is_zero,
                     nullspace, primitive, project_onto_span, rank, scale,
                     solve, sub, vec, zeros)
from .simplex import EQ, LE, LT, LPResult, Row, feasible_point, solve_lp, strict_feasible_point

MAX_AMBIENT_DIM = 6


class GeometryError(ValueError):
    pass


class EmptyPolyhedron(GeometryError):
    pass


class UnboundedDirection(GeometryError):
    pass


def pdot(normal: Vec, x: Sequence[Scalar]) -> Scalar:
    out: Scalar = Fraction(0)
    for a, xi in zip(normal, x, strict=True):
        if a != 0:
            out = out + xi * a
    return out


@dataclass(frozen=True)
class Ineq:
    normal: Vec
    offset: Scalar
    strict: bool = False

    def scaled(self, f: Fraction) -> "Ineq":
        if f <= 0:
            raise ValueError("positive scaling only")
        return Ineq(scale(self.normal, f), self.offset * f, self.strict)


@dataclass(frozen=True)
class Eq:
    normal: Vec
    offset: Scalar


@dataclass(frozen=True)
class Polyhedron:
    """{x : <a,x> <= b (or < b), <e,x> = f}; may be semi-open."""

    dim: int
    ineqs: tuple[Ineq, ...] = ()
    eqs: tuple[Eq, ...] = ()

    # -- construction ----------------------------------------------------
    @staticmethod
    def whole_space(dim: int) -> "Polyhedron":
        return Polyhedron(dim)

    @staticmethod
    def empty(dim: int) -> "Polyhedron":
        return Polyhedron(dim, (Ineq(zeros(dim), Fraction(-1)),))

    @staticmethod
    def from_flat(flat: AffineFlat) -> "Polyhedron":
        return Polyhedron(flat.ambient_dim,
                          eqs=tuple(Eq(n, o) for n, o in flat.equations()))

    def intersect(self, other: "Polyhedron") -> "Polyhedron":
        assert self.dim == other.dim
        return Polyhedron(self.dim, self.ineqs + other.ineqs, self.eqs + other.eqs)

    def closed(self) -> "Polyhedron":
        return Polyhedron(self.dim,
                          tuple(Ineq(i.normal, i.offset, False) for i in self.ineqs),
                          self.eqs)

    def all_strict(self) -> "Polyhedron":
        """Facet-strict version (used for relative interiors of cones)."""
        return Polyhedron(self.dim,
                          tuple(Ineq(i.normal, i.offset, True) for i in self.ineqs),
                          self.eqs)

    @property
    def is_semi_open(self) -> bool:
        return any(i.strict for i in self.ineqs)

    # -- plumbing ---------------------------------------------------------
    def rows(self) -> list[Row]:
        out = [Row(i.normal, i.offset, LT if i.strict else LE) for i in self.ineqs]
        out += [Row(e.normal, e.offset, EQ) for e in self.eqs]
        return out

    def closed_rows(self) -> list[Row]:
        out = [Row(i.normal, i.offset, LE) for i in self.ineqs]
        out += [Row(e.normal, e.offset, EQ) for e in self.eqs]
        return out

    def contains(self, x: Sequence[Scalar]) -> bool:
        for e in self.eqs:
            if sign_of(pdot(e.normal, x) - e.offset) != 0:
                return False
        for i in self.ineqs:
            s = sign_of(pdot(i.normal, x) - i.offset)
            if s > 0 or (s == 0 and i.strict):
                return False
        return True

    def contains_closed(self, x: Sequence[Scalar]) -> bool:
        return self.closed().contains(x)

    def is_empty(self) -> bool:
        return strict_feasible_point(self.dim, self.rows()) is None

    def some_point(self):
        return strict_feasible_point(self.dim, self.rows())

    # -- normalization ----------------------------------------------------
    def canonicalize(self) -> "Polyhedron":
        """Syntactic normal form: RREF equalities, inequality normals reduced
        modulo the equality space, primitive integer scaling, dedup, sort."""
        eq_rows = [list(e.normal) + [e.offset] for e in self.eqs]
        red: list[tuple[Vec, Scalar]] = []
        pivots: list[int] = []
        for rowdata in eq_rows:
            normal = vec(rowdata[:self.dim])
            offset = rowdata[self.dim]
            normal, offset = _reduce_row(normal, offset, red, pivots)
            if is_zero(normal):
                if sign_of(offset) != 0:
                    return Polyhedron.empty(self.dim)
                continue
            piv = next(j for j in range(self.dim) if normal[j] != 0)
            f = Fraction(1) / normal[piv]
            normal, offset = scale(normal, f), offset * f
            red.append((normal, offset))
            pivots.append(piv)
        # back-substitute for a unique reduced form
        for i in range(len(red)):
            n_i, o_i = red[i]
            for j in range(len(red)):
                if i != j and n_i[pivots[j]] != 0:
                    f = n_i[pivots[j]]
                    n_j, o_j = red[j]
                    n_i = sub(n_i, scale(n_j, f))
                    o_i = o_i - o_j * f
            red[i] = (n_i, o_i)
        eqs = []
        for n, o in red:
            pn = primitive(n)
            f = next(pn[j] / n[j] for j in range(self.dim) if n[j] != 0)
            if f < 0:
                pn, f = scale(pn, Fraction(-1)), -f
            first = next(j for j in range(self.dim) if pn[j] != 0)
            if pn[first] < 0:
                pn = scale(pn, Fraction(-1))
                o2 = o * (-f)
            else:
                o2 = o * f
            eqs.append(Eq(pn, o2))
        eqs.sort(key=lambda e: (e.normal, _sort_scalar(e.offset)))

        best: dict[Vec, Ineq] = {}
        order: list[Vec] = []
        for iq in self.ineqs:
            normal, offset = _reduce_row(iq.normal, iq.offset, red, pivots)
            if is_zero(normal):
                s = sign_of(offset)
                if s < 0 or (s == 0 and iq.strict):
                    return Polyhedron.empty(self.dim)
                continue
            pn = primitive(normal)
            f = next(pn[j] / normal[j] for j in range(self.dim) if normal[j] != 0)
            assert f > 0
            cand = Ineq(pn, offset * f, iq.strict)
            old = best.get(pn)
            if old is None:
                best[pn] = cand
                order.append(pn)
            else:
                s = sign_of(cand.offset - old.offset)
                if s < 0 or (s == 0 and cand.strict and not old.strict):
                    best[pn] = cand
        ineqs = sorted(best.values(), key=lambda i: (i.normal, _sort_scalar(i.offset), i.strict))
        return Polyhedron(self.dim, tuple(ineqs), tuple(eqs))

    def canonical_full(self) -> "Polyhedron":
        """Semantic normal form: emptiness check, implicit equalities
        promoted, redundant rows removed by exact LP."""
        p = self.canonicalize()
        if p.ineqs and is_zero(p.ineqs[0].normal):
            return p  # canonical empty
        if p.some_point() is None:
            return Polyhedron.empty(self.dim)
        closed_rows = p.closed_rows()
        promoted: list[Eq] = list(p.eqs)
        keep: list[Ineq] = []
        for iq in p.ineqs:
            res = solve_lp(p.dim, closed_rows, iq.normal, maximize=False)
            if res.status == "optimal" and sign_of(res.value - iq.offset) == 0:
                # holds with equality everywhere; nonempty semi-open sets
                # never have strict implicit rows
                assert not iq.strict
                promoted.append(Eq(iq.normal, iq.offset))
            else:
                keep.append(iq)
        p = Polyhedron(self.dim, tuple(keep), tuple(promoted)).canonicalize()
        kept = list(p.ineqs)
        i = 0
        while i < len(kept):
            others = kept[:i] + kept[i + 1:]
            sys_rows = [Row(q.normal, q.offset, LE) for q in others]
            sys_rows += [Row(e.normal, e.offset, EQ) for e in p.eqs]
            res = solve_lp(p.dim, sys_rows, kept[i].normal)
            drop = False
            if res.status == "optimal":
                s = sign_of(res.value - kept[i].offset)
                drop = s < 0 or (s == 0 and not kept[i].strict)
            if drop:
                kept.pop(i)
            else:
                i += 1
        return Polyhedron(p.dim, tuple(kept), p.eqs)

    def key(self):
        c = self.canonical_full()
        return (c.dim,
                tuple((i.normal, _freeze_scalar(i.offset), i.strict) for i in c.ineqs),
                tuple((e.normal, _freeze_scalar(e.offset)) for e in c.eqs))

    # -- geometry ---------------------------------------------------------
    def affine_hull_flat(self) -> AffineFlat:
        c = self.canonical_full()
        pt = c.some_point()
        if pt is None:
            raise EmptyPolyhedron("empty polyhedron has no affine hull")
        base = vec(_require_rational(pt))
        normals = [e.normal for e in c.eqs]
        return AffineFlat(base, tuple(nullspace(normals, self.dim)))

    def recession_cone(self) -> "Polyhedron":
        if self.some_point() is None:
            raise EmptyPolyhedron("recession cone of an empty polyhedron")
        return Polyhedron(
            self.dim,
            tuple(Ineq(i.normal, Fraction(0)) for i in self.ineqs),
            tuple(Eq(e.normal, Fraction(0)) for e in self.eqs),
        ).canonical_full()

    def lineality_basis(self) -> list[Vec]:
        c = self.canonical_full()
        normals = [i.normal for i in c.ineqs] + [e.normal for e in c.eqs]
        return nullspace(normals, self.dim) if normals else nullspace([], self.dim)


def _sort_scalar(s: Scalar):
    if isinstance(s, Fraction):
        return (0, s, ())
    return (1, s.rat, tuple(sorted(s.logs.items())))


def _freeze_scalar(s: Scalar):
    if isinstance(s, Fraction):
        return s
    return (s.rat, tuple(sorted(s.logs.items())))


def _reduce_row(normal: Vec, offset: Scalar, red: list[tuple[Vec, Scalar]],
                pivots: list[int]) -> tuple[Vec, Scalar]:
    for (en, eo), piv in zip(red, pivots):
        f = normal[piv]
        if f != 0:
            normal = sub(normal, scale(en, f))
            offset = offset - eo * f
    return normal, offset


def _require_rational(xs: Sequence[Scalar]) -> list[Fraction]:
    out = []
    for x in xs:
        if isinstance(x, Fraction):
            out.append(x)
        else:
            if x.logs:
                raise GeometryError("rational coordinates required here")
            out.append(x.rat)
    return out


# -- linear programming over a polyhedron --------------------------------

def lp(p: Polyhedron, objective: Vec, maximize: bool = True) -> LPResult:
    return solve_lp(p.dim, p.closed_rows(), objective, maximize=maximize)


# -- relative interior ----------------------------------------------------

@dataclass
class RelativeInterior:
    point: tuple[Scalar, ...]
    poly: Polyhedron           # closed version with implicit equalities promoted

    def contains(self, x: Sequence[Scalar]) -> bool:
        for e in self.poly.eqs:
            if sign_of(pdot(e.normal, x) - e.offset) != 0:
                return False
        for i in self.poly.ineqs:
            if sign_of(pdot(i.normal, x) - i.offset) >= 0:
                return False
        return True


def ri_query(p: Polyhedron) -> RelativeInterior:
    """Relative-interior point and membership test of the closed version."""
    c = p.closed().canonical_full()
    pt = strict_feasible_point(c.dim, [Row(i.normal, i.offset, LT) for i in c.ineqs]
                               + [Row(e.normal, e.offset, EQ) for e in c.eqs])
    if pt is None:
        raise EmptyPolyhedron("empty polyhedron has no relative interior")
    return RelativeInterior(pt, c)


# -- Fourier-Motzkin -------------------------------------------------------

def fm_eliminate_var(p: Polyhedron, j: int, reduce_rows: bool = True) -> Polyhedron:
    """Eliminate coordinate j (exact projection along e_j)."""
    for e in p.eqs:
        if e.normal[j] != 0:
            newineqs = []
            for iq in p.ineqs:
                f = iq.normal[j] / e.normal[j]
                if f == 0:
                    newineqs.append(iq)
                else:
                    newineqs.append(Ineq(sub(iq.normal, scale(e.normal, f)),
                                         iq.offset - e.offset * f, iq.strict))
            neweqs = []
            for e2 in p.eqs:
                if e2 is e:
                    continue
                f = e2.normal[j] / e.normal[j]
                if f == 0:
                    neweqs.append(e2)
                else:
                    neweqs.append(Eq(sub(e2.normal, scale(e.normal, f)),
                                     e2.offset - e.offset * f))
            out = Polyhedron(p.dim, tuple(newineqs), tuple(neweqs))
            return out.canonicalize() if reduce_rows else out
    pos = [iq for iq in p.ineqs if iq.normal[j] > 0]
    neg = [iq for iq in p.ineqs if iq.normal[j] < 0]
    zero = [iq for iq in p.ineqs if iq.normal[j] == 0]
    combined: list[Ineq] = list(zero)
    for ip in pos:
        for im in neg:
            a = ip.normal[j]
            b = -im.normal[j]
            normal = add(scale(ip.normal, b), scale(im.normal, a))
            offset = ip.offset * b + im.offset * a
            combined.append(Ineq(normal, offset, ip.strict or im.strict))
    out = Polyhedron(p.dim, tuple(combined), p.eqs)
    out = out.canonicalize()
    if reduce_rows and len(out.ineqs) > 12:
        out = out.canonical_full()
    return out


def fm_project(p: Polyhedron, flat: AffineFlat) -> Polyhedron:
    """Orthogonal projection onto lin(flat), as a polyhedron in the same
    ambient space.  rec and ri commute with this projection."""
    d = p.dim
    proj_cols = [project_onto_span(_unit(d, j), flat.basis) for j in range(d)]
    # variables (x, y): rows of p in x; y_i = sum_j proj[i][j] x_j
    ineqs = [Ineq(tuple(list(i.normal) + [Fraction(0)] * d), i.offset, i.strict)
             for i in p.ineqs]
    eqs = [Eq(tuple(list(e.normal) + [Fraction(0)] * d), e.offset) for e in p.eqs]
    for i in range(d):
        row = [proj_cols[j][i] for j in range(d)] + [Fraction(0)] * d
        row[d + i] = Fraction(-1)
        eqs.append(Eq(tuple(row), Fraction(0)))
    big = Polyhedron(2 * d, tuple(ineqs), tuple(eqs))
    for j in range(d):
        big = fm_eliminate_var(big, j)
    ineqs2 = tuple(Ineq(i.normal[d:], i.offset, i.strict) for i in big.ineqs)
    eqs2 = tuple(Eq(e.normal[d:], e.offset) for e in big.eqs)
    return Polyhedron(d, ineqs2, eqs2).canonical_full()


def _unit(d: int, j: int) -> Vec:
    return tuple(Fraction(1 if i == j else 0) for i in range(d))


# -- V-representation ------------------------------------------------------

def hull_polyhedron(points: Sequence[Vec], rays: Sequence[Vec] = (),
                    max_dim: int = MAX_AMBIENT_DIM) -> Polyhedron:
    """H-representation of conv(points) + cone(rays), by exact elimination."""
    if not points:
        raise GeometryError("hull needs at least one point")
    d = len(points[0])
    if d > max_dim:
        raise GeometryError(f"ambient dimension {d} exceeds cap {max_dim}")
    pts = [vec(p) for p in points]
    rys = [vec(r) for r in rays if not is_zero(vec(r))]
    m, r = len(pts), len(rys)
    n = d + m + r
    eqs = []
    for i in range(d):
        row = [Fraction(0)] * n
        row[i] = Fraction(1)
        for k, pt in enumerate(pts):
            row[d + k] = -pt[i]
        for l, ry in enumerate(rys):
            row[d + m + l] = -ry[i]
        eqs.append(Eq(tuple(row), Fraction(0)))
    row = [Fraction(0)] * n
    for k in range(m):
        row[d + k] = Fraction(1)
    eqs.append(Eq(tuple(row), Fraction(1)))
    ineqs = []
    for k in range(m + r):
        row = [Fraction(0)] * n
        row[d + k] = Fraction(-1)
        ineqs.append(Ineq(tuple(row), Fraction(0)))
    big = Polyhedron(n, tuple(ineqs), tuple(eqs))
    for j in range(n - 1, d - 1, -1):
        big = fm_eliminate_var(big, j)
    out = Polyhedron(d, tuple(Ineq(i.normal[:d], i.offset, i.strict) for i in big.ineqs),
                     tuple(Eq(e.normal[:d], e.offset) for e in big.eqs))
    return out.canonical_full()


def generators(p: Polyhedron) -> tuple[list[Vec], list[Vec]]:
    """(points, rays) with conv(points) + cone(rays) = closed p.

    Points are one representative per minimal face; rays are the extreme rays
    of the recession cone plus +-basis of the lineality space.
    """
    c = p.closed().canonical_full()
    if c.ineqs and is_zero(c.ineqs[0].normal):
        raise EmptyPolyhedron("no generators for the empty polyhedron")
    lin = c.lineality_basis()
    q = Polyhedron(c.dim, c.ineqs,
                   c.eqs + tuple(Eq(l, Fraction(0)) for l in lin)).canonical_full()
    pts = _vertices_pointed(q)
    rays = _extreme_rays_pointed(q.recession_cone())
    for l in lin:
        rays.append(primitive(l))
        rays.append(primitive(scale(l, Fraction(-1))))
    pts = sorted(set(pts))
    rays = sorted(set(rays))
    return pts, rays


def _vertices_pointed(q: Polyhedron) -> list[Vec]:
    d = q.dim
    eq_normals = [e.normal for e in q.eqs]
    base_rank = rank(eq_normals)
    need = d - base_rank
    idxs = range(len(q.ineqs))
    out: set[Vec] = set()
    if need == 0:
        sol = solve([list(n) for n in eq_normals],
                    [_as_frac(e.offset) for e in q.eqs])
        if sol is not None:
            pt = vec(sol)
            if q.contains(pt):
                out.add(pt)
        return sorted(out)
    for combo in itertools.combinations(idxs, need):
        normals = eq_normals + [q.ineqs[i].normal for i in combo]
        if rank(normals) != d:
            continue
        rhs = [_as_frac(e.offset) for e in q.eqs] + [_as_frac(q.ineqs[i].offset) for i in combo]
        sol = solve([list(n) for n in normals], rhs)
        if sol is None:
            continue
        pt = vec(sol)
        if q.contains(pt):
            out.add(pt)
    return sorted(out)


def _extreme_rays_pointed(cone: Polyhedron) -> list[Vec]:
    d = cone.dim
    eq_normals = [e.normal for e in cone.eqs]
    base_rank = rank(eq_normals)
    need = d - 1 - base_rank
    if need < 0:
        return []
    out: set[Vec] = set()
    for combo in itertools.combinations(range(len(cone.ineqs)), need):
        normals = eq_normals + [cone.ineqs[i].normal for i in combo]
        if rank(normals) != d - 1:
            continue
        null = nullspace(normals, d)
        if len(null) != 1:
            continue
        for cand in (null[0], scale(null[0], Fraction(-1))):
            if cone.contains(cand) and not is_zero(cand):
                tight = [i.normal for i in cone.ineqs if dot(i.normal, cand) == 0]
                if rank(eq_normals + tight) == d - 1:
                    out.add(primitive(cand))
    return sorted(out)


def _as_frac(s: Scalar) -> Fraction:
    if isinstance(s, Fraction):
        return s
    if not s.logs:
        return s.rat
    raise GeometryError("rational offsets required for vertex enumeration")


# -- faces ------------------------------------------------------------------

@dataclass(frozen=True)
class PolyFace:
    """Face of a closed polyhedron, identified by its full tight set."""

    tight: frozenset[int]
    poly: Polyhedron
    flat: AffineFlat
    points: tuple[Vec, ...]
    rays: tuple[Vec, ...]

    @property
    def dim(self) -> int:
        return self.flat.dim

    def sort_key(self):
        return (self.dim, tuple(sorted(self.tight)))


def _face_from_tight(base: Polyhedron, tight: frozenset[int]) -> Optional[PolyFace]:
    eqs = list(base.eqs) + [Eq(base.ineqs[i].normal, base.ineqs[i].offset) for i in tight]
    rest = [base.ineqs[i] for i in range(len(base.ineqs)) if i not in tight]
    fpoly = Polyhedron(base.dim, tuple(rest), tuple(eqs))
    pt = fpoly.some_point()
    if pt is None:
        return None
    # close the tight set: inequalities implied to equality on this face
    full = set(tight)
    rows = fpoly.closed_rows()
    for i in range(len(base.ineqs)):
        if i in full:
            continue
        iq = base.ineqs[i]
        res = solve_lp(base.dim, rows, iq.normal, maximize=False)
        if res.status == "optimal" and sign_of(res.value - iq.offset) == 0:
            full.add(i)
    if full != set(tight):
        return _face_from_tight(base, frozenset(full))
    pts, rays = generators(fpoly)
    flat = fpoly.affine_hull_flat()
    return PolyFace(frozenset(full), fpoly.canonical_full(), flat,
                    tuple(pts), tuple(rays))


@functools.lru_cache(maxsize=512)
def face_lattice(p: Polyhedron, max_dim: int = MAX_AMBIENT_DIM) -> list[PolyFace]:
    """All nonempty faces of the closed polyhedron, p itself included."""
    if p.dim > max_dim:
        raise GeometryError(f"ambient dimension {p.dim} exceeds cap {max_dim}")
    c = p.closed().canonical_full()
    if c.ineqs and is_zero(c.ineqs[0].normal):
        raise EmptyPolyhedron("face lattice of an empty polyhedron")
    top = _face_from_tight(c, frozenset())
    assert top is not None
    found: dict[frozenset[int], PolyFace] = {top.tight: top}
    frontier = [top]
    while frontier:
        nxt = []
        for face in frontier:
            for i in range(len(c.ineqs)):
                if i in face.tight:
                    continue
                cand = _face_from_tight(c, face.tight | {i})
                if cand is not None and cand.tight not in found:
                    found[cand.tight] = cand
                    nxt.append(cand)
        frontier = nxt
    return tuple(sorted(found.values(), key=lambda f: f.sort_key()))


def exposed_face(p: Polyhedron, tau: Vec, max_dim: int = MAX_AMBIENT_DIM) -> PolyFace:
    """Argmax face of <tau, .> over the closed polyhedron."""
    if is_zero(tau):
        raise GeometryError("zero vector never exposes a face")
    c = p.closed().canonical_full()
    res = lp(c, tau)
    if res.status == "infeasible":
        raise EmptyPolyhedron("cannot expose a face of the empty polyhedron")
    if res.status == "unbounded":
        raise UnboundedDirection(f"objective unbounded along {res.ray}")
    cut = Polyhedron(c.dim, c.ineqs, c.eqs + (Eq(vec(tau), res.value),))
    cut_rows = cut.closed_rows()
    tight = set()
    for i, iq in enumerate(c.ineqs):
        low = solve_lp(c.dim, cut_rows, iq.normal, maximize=False)
        if low.status == "optimal" and sign_of(low.value - iq.offset) == 0:
            tight.add(i)
    face = _face_from_tight(c, frozenset(tight))
    assert face is not None
    return face


@functools.lru_cache(maxsize=2048)
def exposing_cone(p: Polyhedron, face: PolyFace) -> Polyhedron:
    """Relatively open cone of directions whose argmax face is exactly `face`.

    For the top face this is the orthogonal complement of lin(p); the zero
    vector is a member of that set but is never a valid exposing direction.
    """
    c = p.closed().canonical_full()
    normals = [c.ineqs[i].normal for i in sorted(face.tight)]
    lines = [e.normal for e in c.eqs]
    origin = zeros(c.dim)
    ray_list = list(normals)
    for l in lines:
        ray_list.append(l)
        ray_list.append(scale(l, Fraction(-1)))
    closed_cone = hull_polyhedron([origin], ray_list, max_dim=max(c.dim, MAX_AMBIENT_DIM))
    return closed_cone.all_strict().canonicalize()
