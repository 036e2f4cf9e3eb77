"""Mixed discrete base measures: finite atoms plus atom families along rays
and quadratic curves with geometric-power weight laws.

A family places atoms at x_k = base + k*step (+ k^2*quad) for k = 1, 2, ...
with weights scale * rho^k * k^(-alpha).  Finite total mass requires
alpha > 1 whenever rho = 1.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

from . import errors
from .geometry import (AffineFlat, Eq, Polyhedron, Vec, affine_hull, dot,
                       hull_polyhedron, is_zero, lp, vec)
from .ksets import KSet, kset_from_linear, kset_from_quadratic
from .scalars import (PowerProduct, Weight, rat, weight_add, weight_mul)


@dataclass(frozen=True)
class Atom:
    point: Vec
    weight: Weight

    def __post_init__(self):
        w = self.weight
        ok = (isinstance(w, PowerProduct) and w.coeff > 0) or (not isinstance(w, PowerProduct) and rat(w) > 0)
        if not ok:
            raise errors.ZeroWeight(f"atom at {self.point} needs positive weight")


@dataclass(frozen=True)
class RayFamily:
    base: Vec
    step: Vec
    rho: Fraction
    alpha: Fraction
    scale: Fraction

    def __post_init__(self):
        _check_family(self.step, self.rho, self.alpha, self.scale, "ray step")

    def atom_point(self, k: int) -> Vec:
        return tuple(p + k * u for p, u in zip(self.base, self.step))

    def atom_weight(self, k: int) -> Weight:
        return _family_weight(self.scale, self.rho, self.alpha, k)

    @property
    def directions(self) -> tuple[Vec, ...]:
        return (self.step,)


@dataclass(frozen=True)
class CurveFamily:
    base: Vec
    lin: Vec
    quad: Vec
    rho: Fraction
    alpha: Fraction
    scale: Fraction

    def __post_init__(self):
        _check_family(self.quad, self.rho, self.alpha, self.scale, "curve quad")

    def atom_point(self, k: int) -> Vec:
        return tuple(p + k * u + k * k * v
                     for p, u, v in zip(self.base, self.lin, self.quad))

    def atom_weight(self, k: int) -> Weight:
        return _family_weight(self.scale, self.rho, self.alpha, k)

    @property
    def directions(self) -> tuple[Vec, ...]:
        return (self.lin, self.quad)


Family = Union[RayFamily, CurveFamily]


def _check_family(direction: Vec, rho: Fraction, alpha: Fraction, scale: Fraction, what: str):
    if is_zero(direction):
        raise errors.InvalidInput(f"{what} must be nonzero")
    if not (0 < rho <= 1):
        raise errors.InvalidInput(f"family ratio must lie in (0, 1], got {rho}")
    if alpha < 0:
        raise errors.InvalidInput(f"family power must be >= 0, got {alpha}")
    if scale <= 0:
        raise errors.ZeroWeight("family scale must be positive")
    if rho == 1 and alpha <= 1:
        raise errors.InfiniteMass(f"rho = 1 requires alpha > 1, got alpha = {alpha}")


def _family_weight(scale: Fraction, rho: Fraction, alpha: Fraction, k: int) -> Weight:
    w: Weight = scale * rho**k
    if alpha != 0:
        w = weight_mul(w, PowerProduct.int_power(k, -alpha))
    return w


@dataclass(frozen=True)
class MixedMeasure:
    dimension: int
    atoms: tuple[Atom, ...] = ()
    rays: tuple[RayFamily, ...] = ()
    curves: tuple[CurveFamily, ...] = ()

    @property
    def families(self) -> tuple[Family, ...]:
        return self.rays + self.curves

    @property
    def has_curves(self) -> bool:
        return bool(self.curves)

    def family_kset(self, fam: Family, region: Polyhedron) -> KSet:
        """Indices k whose atom lies in the (closed) region."""
        ks = KSet.all()
        rows = [(e.normal, e.offset, "eq") for e in region.eqs]
        rows += [(i.normal, i.offset, "le") for i in region.ineqs]
        for normal, offset, rel in rows:
            if not isinstance(offset, Fraction):
                raise errors.InvalidInput("rational region offsets required")
            c0 = dot(normal, fam.base) - offset
            c1 = dot(normal, fam.step if isinstance(fam, RayFamily) else fam.lin)
            c2 = Fraction(0) if isinstance(fam, RayFamily) else dot(normal, fam.quad)
            ks = ks.intersect(kset_from_quadratic(c2, c1, c0, rel))
            if ks.is_empty:
                return ks
        return ks


COLLISION_SCAN = 1000


@functools.lru_cache(maxsize=4096)
def validate(measure: MixedMeasure) -> MixedMeasure:
    """Canonical form: duplicate finite atoms merged, invariants enforced,
    family/finite collisions rejected on the scanned index range."""
    d = measure.dimension
    if d < 1:
        raise errors.InvalidInput("dimension must be >= 1")
    for a in measure.atoms:
        if len(a.point) != d:
            raise errors.InvalidInput("atom dimension mismatch")
    for f in measure.families:
        for v in (f.base,) + f.directions:
            if len(v) != d:
                raise errors.InvalidInput("family dimension mismatch")
    merged: dict[Vec, Weight] = {}
    order: list[Vec] = []
    for a in measure.atoms:
        if a.point in merged:
            merged[a.point] = weight_add(merged[a.point], a.weight)
        else:
            merged[a.point] = a.weight
            order.append(a.point)
    atoms = tuple(Atom(p, merged[p]) for p in sorted(order))
    fam_points: list[set[Vec]] = []
    for fam in measure.families:
        pts = {fam.atom_point(k) for k in range(1, COLLISION_SCAN + 1)}
        for a in atoms:
            if a.point in pts:
                raise errors.DuplicateAtomInFamily(
                    f"finite atom {a.point} collides with a family atom")
        for other in fam_points:
            if pts & other:
                raise errors.DuplicateAtomInFamily(
                    "two atom families share a point")
        fam_points.append(pts)
    for cf in measure.curves:
        # p + k u + k^2 v collides for k != m iff u = -(k+m) v
        t = _parallel_ratio(cf.lin, cf.quad)
        if t is not None and t.denominator == 1 and int(-t) >= 3:
            raise errors.DuplicateAtomInFamily(
                "curve family revisits a point (lin = -(k+m) * quad)")
    if not atoms and not measure.families:
        raise errors.InvalidInput("measure needs at least one atom or family")
    return MixedMeasure(d, atoms, measure.rays, measure.curves)


def _parallel_ratio(u: Vec, v: Vec) -> Optional[Fraction]:
    """t with u = t*v, or None."""
    t = None
    for ui, vi in zip(u, v):
        if vi == 0:
            if ui != 0:
                return None
            continue
        c = ui / vi
        if t is None:
            t = c
        elif t != c:
            return None
    return t


# -- support and span -------------------------------------------------------

@functools.lru_cache(maxsize=256)
def support_generators(measure: MixedMeasure) -> tuple[tuple[Vec, ...], tuple[Vec, ...]]:
    """Points and rays generating cl(cc) for measures without curves."""
    pts = [a.point for a in measure.atoms]
    rays = []
    for rf in measure.rays:
        pts.append(rf.atom_point(1))
        rays.append(rf.step)
    return tuple(pts), tuple(rays)


@functools.lru_cache(maxsize=256)
def support_polyhedron(measure: MixedMeasure) -> Polyhedron:
    if measure.has_curves:
        raise errors.NonPolyhedral("curve families have non-polyhedral support")
    pts, rays = support_generators(measure)
    return hull_polyhedron(list(pts), list(rays))


@functools.lru_cache(maxsize=256)
def measure_flat(measure: MixedMeasure) -> AffineFlat:
    """Affine hull of the support (all atoms, family spans included)."""
    pts = [a.point for a in measure.atoms]
    rays: list[Vec] = []
    for rf in measure.rays:
        pts.append(rf.atom_point(1))
        rays.append(rf.step)
    for cf in measure.curves:
        pts += [cf.atom_point(1), cf.atom_point(2), cf.atom_point(3)]
    return affine_hull(pts, rays)


@dataclass(frozen=True)
class NonPolyhedralSupport:
    flat: AffineFlat
    recession_directions: tuple[Vec, ...]


def convex_support(measure: MixedMeasure):
    """The closed convex support: a polyhedron, or a summary when curve
    families make it non-polyhedral."""
    if not measure.has_curves:
        return support_polyhedron(measure)
    recs = tuple(rf.step for rf in measure.rays) + tuple(cf.quad for cf in measure.curves)
    return NonPolyhedralSupport(measure_flat(measure), recs)


# -- convex core ------------------------------------------------------------

def core_membership(measure: MixedMeasure, x: Vec) -> bool:
    """Is x a finite convex combination of atoms?  Exact.

    conv(family atoms) = {base + t*step : t >= 1}, so the decision reduces
    to strict LPs over subsets of families carrying positive mass.
    """
    if measure.has_curves:
        raise errors.NonPolyhedral("no exact core membership for curve measures")
    x = vec(x)
    from .geometry.simplex import EQ, LE, LT, Row, strict_feasible_point

    atoms = [a.point for a in measure.atoms]
    fams = list(measure.rays)
    na, nf = len(atoms), len(fams)
    d = measure.dimension
    for used in itertools.product((False, True), repeat=nf):
        nvars = na + 2 * nf  # lambda_a, nu_f, s_f
        rows: list[Row] = []
        for i in range(d):
            coeffs = [Fraction(0)] * nvars
            for j, p in enumerate(atoms):
                coeffs[j] = p[i]
            for f, fam in enumerate(fams):
                coeffs[na + 2 * f] = fam.base[i] + fam.step[i]  # nu at t = 1
                coeffs[na + 2 * f + 1] = fam.step[i]            # s = nu*(t-1) >= 0
            rows.append(Row(tuple(coeffs), x[i], EQ))
        coeffs = [Fraction(0)] * nvars
        for j in range(na):
            coeffs[j] = Fraction(1)
        for f in range(nf):
            coeffs[na + 2 * f] = Fraction(1)
        rows.append(Row(tuple(coeffs), Fraction(1), EQ))
        for j in range(na):
            e = [Fraction(0)] * nvars
            e[j] = Fraction(-1)
            rows.append(Row(tuple(e), Fraction(0), LE))
        for f in range(nf):
            e = [Fraction(0)] * nvars
            e[na + 2 * f] = Fraction(-1)
            rows.append(Row(tuple(e), Fraction(0), LT if used[f] else EQ))
            e2 = [Fraction(0)] * nvars
            e2[na + 2 * f + 1] = Fraction(-1)
            rows.append(Row(tuple(e2), Fraction(0), LE if used[f] else EQ))
        if strict_feasible_point(nvars, rows) is not None:
            return True
    return False


# -- restriction -------------------------------------------------------------

def restrict(measure: MixedMeasure, flat: AffineFlat) -> MixedMeasure:
    """Restriction to an affine flat; atom families are kept whole when their
    affine span lies inside, otherwise their finitely many incident atoms are
    emitted as finite atoms."""
    region = Polyhedron.from_flat(flat)
    atoms = [a for a in measure.atoms if flat.contains(a.point)]
    rays: list[RayFamily] = []
    curves: list[CurveFamily] = []
    emitted: list[Atom] = []
    for fam in measure.families:
        inside = flat.contains(fam.atom_point(1)) and all(
            flat.lin_contains(dv) for dv in fam.directions)
        if inside:
            (rays if isinstance(fam, RayFamily) else curves).append(fam)
            continue
        ks = measure.family_kset(fam, region)
        if ks.tail is not None:
            # a non-contained family meets a flat in at most deg points
            raise AssertionError("family unexpectedly contained in flat")
        for k in ks.iter_finite():
            emitted.append(Atom(fam.atom_point(k), fam.atom_weight(k)))
    for e in emitted:
        if any(a.point == e.point for a in atoms):
            raise errors.DuplicateAtomInFamily(
                f"restricted family atom collides at {e.point}")
    out = MixedMeasure(measure.dimension, tuple(atoms) + tuple(emitted),
                       tuple(rays), tuple(curves))
    if not out.atoms and not out.families:
        raise errors.EmptyRestriction("no atom lies on the flat")
    return validate(out)


# -- masses ------------------------------------------------------------------

def region_kset(measure: MixedMeasure, fam: Family, region) -> KSet:
    if region == "all":
        return KSet.all()
    if isinstance(region, AffineFlat):
        return measure.family_kset(fam, Polyhedron.from_flat(region))
    if isinstance(region, Polyhedron):
        return measure.family_kset(fam, region)
    raise errors.InvalidInput(f"bad region {region!r}")


def atoms_in_region(measure: MixedMeasure, region) -> list[Atom]:
    if region == "all":
        return list(measure.atoms)
    if isinstance(region, AffineFlat):
        return [a for a in measure.atoms if region.contains(a.point)]
    if isinstance(region, Polyhedron):
        return [a for a in measure.atoms if region.contains_closed(a.point)]
    raise errors.InvalidInput(f"bad region {region!r}")


def supporting_hyperplane_report(measure: MixedMeasure, normal: Vec, offset: Fraction):
    """Checks that {<normal, x> = offset} supports cs and reports the atom
    structure it carries; positive mass iff the section is nonempty, and the
    mass outside the hull closure of the section is identically zero."""
    poly = support_polyhedron(measure)
    normal = vec(normal)
    offset = rat(offset)
    res = lp(poly, normal)
    flipped = False
    if not (res.status == "optimal" and res.value == offset):
        res2 = lp(poly, tuple(-c for c in normal))
        if res2.status == "optimal" and -res2.value == offset:
            normal = tuple(-c for c in normal)
            offset = -offset
            flipped = True
        else:
            raise errors.NotSupporting(
                f"hyperplane <{normal}, x> = {offset} does not support cs")
    flat_region = Polyhedron(measure.dimension, (), (Eq(normal, offset),))
    section_atoms = atoms_in_region(measure, flat_region)
    fam_ksets = [(fam, measure.family_kset(fam, flat_region)) for fam in measure.families]
    nonempty = bool(section_atoms) or any(not ks.is_empty for _, ks in fam_ksets)
    return {
        "normal": normal,
        "offset": offset,
        "flipped": flipped,
        "atoms": section_atoms,
        "family_ksets": fam_ksets,
        "face_nonempty": nonempty,
        "residual_zero": True,
    }
