"""Faces of the convex core as chain-generated objects.

A face handle carries the exposing chain that produced it, the restriction
of the base measure to the face closure, and the affine hull of that
restriction.  Exposing maximizes a rational linear functional over the atom
components exactly (families are affine or quadratic in the index, so the
argmax is attained whenever the sup is finite).  Accessibility relative to a
convex parameter set follows the chain recursion: each step needs an
exposing direction inside the recession cone of the projected parameter
set, decided by strict LPs over exact cones.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from . import errors
from .family import ParamSet, ParamVec, domain_contains, param_in_span, pvec
from .geometry import (AffineFlat, Eq, PolyFace, Polyhedron, Vec, dot,
                       exposing_cone, face_lattice, fm_project, is_zero,
                       primitive, project_onto_span, strict_feasible_point,
                       sub, vec, zeros)
from .geometry.simplex import EQ, LE, LT, Row
from .measures import (Atom, CurveFamily, Family, MixedMeasure, RayFamily,
                       measure_flat, support_polyhedron, validate)


@dataclass(frozen=True)
class FaceHandle:
    """A face of cc(mu), realized by its restricted measure."""

    measure: MixedMeasure          # restriction of the base to the face closure
    chain: tuple[Vec, ...]         # exposing vectors, orthogonalized
    flat: AffineFlat               # affine hull of the face
    parent: Optional["FaceHandle"] = None

    @functools.cached_property
    def key(self):
        m = self.measure
        return (tuple((a.point, a.weight) for a in m.atoms),
                tuple(m.rays), tuple(m.curves))

    @property
    def dim(self) -> int:
        return self.flat.dim

    @property
    def is_top(self) -> bool:
        return not self.chain

    def chain_faces(self) -> list["FaceHandle"]:
        """Ancestry F_0 ⊃ ... ⊃ this, from the top."""
        out = [self]
        node = self
        while node.parent is not None:
            node = node.parent
            out.append(node)
        return list(reversed(out))

    def __repr__(self):
        return f"FaceHandle(dim={self.dim}, chain={self.chain})"


@dataclass(frozen=True)
class Member:
    """One distribution of the extension: a face plus a parameter in the
    face's canonical parameter set."""

    face: FaceHandle
    theta: ParamVec


def member(face: FaceHandle, theta) -> Member:
    theta = pvec(theta)
    if not param_in_span(theta, face.flat.basis):
        raise errors.NotInLin(f"parameter {theta} is not in the face span")
    if not domain_contains(face.measure, theta):
        raise errors.DomainViolation(f"parameter {theta} outside the face domain")
    return Member(face, theta)


def top_face(measure: MixedMeasure) -> FaceHandle:
    measure = validate(measure)
    return FaceHandle(measure, (), measure_flat(measure))


# -- exposing ------------------------------------------------------------------

@dataclass(frozen=True)
class ArgmaxPattern:
    value: Fraction
    atom_idx: tuple[int, ...]
    fam_modes: tuple[object, ...]   # per family: "all" | tuple of k | None


def linear_argmax(measure: MixedMeasure, tau: Vec) -> ArgmaxPattern:
    """Exact sup and argmax structure of <tau, .> over the atoms."""
    tau = vec(tau)
    parts: list[tuple[object, Fraction]] = []
    for a in measure.atoms:
        parts.append(("atom", dot(a.point, tau)))
    for fam in measure.families:
        if isinstance(fam, RayFamily):
            du = dot(fam.step, tau)
            if du > 0:
                raise errors.UnboundedDirectionError(
                    f"<tau, step> = {du} > 0 on a ray family")
            if du == 0:
                parts.append(("all", dot(fam.base, tau)))
            else:
                parts.append(((1,), dot(fam.atom_point(1), tau)))
        else:
            dv = dot(fam.quad, tau)
            du = dot(fam.lin, tau)
            if dv > 0 or (dv == 0 and du > 0):
                raise errors.UnboundedDirectionError("unbounded on a curve family")
            if dv == 0 and du == 0:
                parts.append(("all", dot(fam.base, tau)))
            elif dv == 0:
                parts.append(((1,), dot(fam.atom_point(1), tau)))
            else:
                # strictly concave in k, so the integer argmax flanks the vertex
                kstar = -du / (2 * dv)
                k0 = max(1, int(kstar))
                cands = {max(1, k0 - 1), k0, k0 + 1}
                vals = {k: dot(fam.atom_point(k), tau) for k in cands}
                top = max(vals.values())
                ks = tuple(sorted(k for k, v in vals.items() if v == top))
                parts.append((ks, top))
    best = max(v for _, v in parts)
    atom_idx = tuple(i for i in range(len(measure.atoms)) if parts[i][1] == best)
    fam_modes = tuple(mode if v == best else None
                      for mode, v in parts[len(measure.atoms):])
    return ArgmaxPattern(best, atom_idx, fam_modes)


def _measure_from_pattern(measure: MixedMeasure, pat: ArgmaxPattern) -> MixedMeasure:
    atoms = [measure.atoms[i] for i in pat.atom_idx]
    rays: list[RayFamily] = []
    curves: list[CurveFamily] = []
    for fam, mode in zip(measure.families, pat.fam_modes):
        if mode is None:
            continue
        if mode == "all":
            (rays if isinstance(fam, RayFamily) else curves).append(fam)
        else:
            for k in mode:
                atoms.append(Atom(fam.atom_point(k), fam.atom_weight(k)))
    return validate(MixedMeasure(measure.dimension, tuple(atoms), tuple(rays), tuple(curves)))


def expose(face: FaceHandle, tau: Vec) -> FaceHandle:
    """The face of `face` exposed by a nonzero rational tau in its span."""
    tau = vec(tau)
    if is_zero(tau):
        raise errors.ZeroDirection("the zero vector never exposes a face")
    if not face.flat.lin_contains(tau):
        raise errors.NotInLin(f"direction {tau} outside the face span")
    pat = linear_argmax(face.measure, tau)
    restricted = _measure_from_pattern(face.measure, pat)
    flat = measure_flat(restricted)
    stored = sub(tau, project_onto_span(tau, flat.basis))
    assert not is_zero(stored)
    return FaceHandle(restricted, face.chain + (primitive(stored),), flat, parent=face)


def verify_access_sequence(measure: MixedMeasure, seq: Sequence[Vec]) -> FaceHandle:
    """Fold expose over the sequence from the top face."""
    node = top_face(measure)
    for idx, tau in enumerate(seq):
        try:
            node = expose(node, vec(tau))
        except errors.EfcError as e:
            raise type(e)(f"step {idx + 1}: {e}") from e
    return node


def enumerate_faces(measure: MixedMeasure) -> list[FaceHandle]:
    """All faces of cc(mu); polyhedral measures only."""
    if measure.has_curves:
        raise errors.NonPolyhedral("face enumeration needs a polyhedral support")
    top = top_face(measure)
    found: dict = {top.key: top}
    frontier = [top]
    while frontier:
        nxt = []
        for node in frontier:
            if node.dim == 0:
                continue
            poly = support_polyhedron(node.measure).canonical_full()
            for iq in poly.ineqs:
                tau = project_onto_span(iq.normal, node.flat.basis)
                if is_zero(tau):
                    continue
                child = expose(node, tau)
                if child.key not in found:
                    found[child.key] = child
                    nxt.append(child)
        frontier = nxt
    return sorted(found.values(), key=lambda f: (f.dim, f.key))


def face_contains(big: FaceHandle, small: FaceHandle) -> bool:
    """Exact containment of face atom sets (equivalently of face closures)."""
    bm = big.measure
    big_finite = {a.point for a in bm.atoms}
    big_fams = {fam_identity(f) for f in bm.families}

    def point_in_big(p: Vec) -> bool:
        if p in big_finite:
            return True
        region = Polyhedron.from_flat(AffineFlat(p, ()))
        return any(not bm.family_kset(fam, region).is_empty for fam in bm.families)

    if any(not point_in_big(a.point) for a in small.measure.atoms):
        return False
    return all(fam_identity(f) in big_fams for f in small.measure.families)


def fam_identity(fam: Family):
    if isinstance(fam, RayFamily):
        return ("ray", fam.base, fam.step, fam.rho, fam.alpha, fam.scale)
    return ("curve", fam.base, fam.lin, fam.quad, fam.rho, fam.alpha, fam.scale)


# -- adaptedness ------------------------------------------------------------------

@dataclass(frozen=True)
class StepReport:
    index: int
    tau: Vec
    in_recession: bool


def is_adapted(measure: MixedMeasure, seq: Sequence[Vec], xi: ParamSet):
    """Per-step check: each chain vector must lie in the recession cone of
    the parameter set projected onto the previous face span."""
    faces = [top_face(measure)]
    for tau in seq:
        faces.append(expose(faces[-1], vec(tau)))
    if xi.is_empty:
        reports = [StepReport(i + 1, faces[i + 1].chain[-1], False)
                   for i in range(len(seq))]
        return (not seq), reports
    reports = []
    ok = True
    for i in range(len(seq)):
        stored = faces[i + 1].chain[-1]
        cone = projected_recession(xi, faces[i].flat)
        good = cone.contains(stored)
        reports.append(StepReport(i + 1, stored, good))
        ok = ok and good
    return ok, reports


@functools.lru_cache(maxsize=2048)
def _projected_recession_cached(rec: Polyhedron, basis: tuple[Vec, ...], dim: int) -> Polyhedron:
    return fm_project(rec, AffineFlat(zeros(dim), basis))


def projected_recession(xi: ParamSet, flat: AffineFlat) -> Polyhedron:
    return _projected_recession_cached(xi.recession_cone, flat.basis, flat.ambient_dim)


# -- accessibility -----------------------------------------------------------------

@dataclass
class AccessResult:
    accessible: bool
    chain: Optional[list[Vec]] = None          # stored witness exposing vectors
    faces: Optional[list[FaceHandle]] = None   # F_0 ⊃ ... ⊃ target
    refutation: Optional[dict] = None


_ACCESS_MEMO: dict = {}


def is_accessible(measure: MixedMeasure, target: FaceHandle, xi: ParamSet) -> AccessResult:
    """Search for an access sequence to the target whose steps all lie in the
    projected recession cones (exhaustive; raises SearchIncomplete only when a
    curve argmax cell beyond the enumeration cap could matter)."""
    memo_key = (measure, target.key, xi)
    hit = _ACCESS_MEMO.get(memo_key)
    if hit is not None:
        if isinstance(hit, errors.SearchIncomplete):
            raise hit
        return hit
    try:
        res = _is_accessible_impl(measure, target, xi)
    except errors.SearchIncomplete as e:
        if len(_ACCESS_MEMO) < 4096:
            _ACCESS_MEMO[memo_key] = e
        raise
    if len(_ACCESS_MEMO) < 4096:
        _ACCESS_MEMO[memo_key] = res
    return res


def _is_accessible_impl(measure: MixedMeasure, target: FaceHandle, xi: ParamSet) -> AccessResult:
    top = top_face(measure)
    if not face_contains(top, target):
        raise errors.InvalidInput("target is not a face of this measure")
    if xi.is_empty:
        if target.key == top.key:
            return AccessResult(True, [], [top])
        return AccessResult(False, refutation={"reason": "empty parameter set"})
    seen: set = set()
    failures: list[dict] = []
    state = {"incomplete": False}

    def search(node: FaceHandle):
        if node.key == target.key:
            return [], [node]
        if node.key in seen:
            return None
        seen.add(node.key)
        rec_proj = projected_recession(xi, node.flat)
        for tau, note in _candidate_steps(node, target, rec_proj):
            if tau is None:
                state["incomplete"] = True
                continue
            child = expose(node, tau)
            if not face_contains(child, target) or child.key == node.key:
                continue
            deeper = search(child)
            if deeper is not None:
                taus, chain_faces = deeper
                return [child.chain[-1]] + taus, [node] + chain_faces
        failures.append({"dim": node.dim, "atoms": len(node.measure.atoms)})
        return None

    hit = search(top)
    if hit is not None:
        taus, chain_faces = hit
        return AccessResult(True, taus, chain_faces)
    if state["incomplete"]:
        raise errors.SearchIncomplete(
            "curve-case accessibility search truncated; no witness found")
    return AccessResult(False, refutation={
        "reason": "exhausted adapted chains",
        "explored": len(seen),
        "dead_ends": failures,
    })


def _candidate_steps(node: FaceHandle, target: FaceHandle, rec_proj: Polyhedron):
    """Rational exposing directions, one per feasible candidate cell of
    directions that (a) expose a proper face able to contain the target and
    (b) lie in the projected recession cone."""
    lin_rows = [Row(n, Fraction(0), EQ) for n in node.flat.normals()]
    rec_rows = [Row(i.normal, i.offset, LE) for i in rec_proj.ineqs]
    rec_rows += [Row(e.normal, e.offset, EQ) for e in rec_proj.eqs]
    if not node.measure.has_curves:
        poly = support_polyhedron(node.measure).canonical_full()
        for pf in face_lattice(poly):
            if not pf.tight:
                continue  # the face itself; chains must strictly descend
            cone = exposing_cone(poly, pf)
            rows = [Row(i.normal, i.offset, LT if i.strict else LE) for i in cone.ineqs]
            rows += [Row(e.normal, e.offset, EQ) for e in cone.eqs]
            rows += rec_rows + lin_rows
            pt = strict_feasible_point(node.measure.dimension, rows)
            if pt is not None:
                yield _rationalize(pt), {"kind": "lattice", "tight": sorted(pf.tight)}
        return
    yield from _curve_candidates(node, target, rec_rows + lin_rows)


def _rationalize(pt) -> Vec:
    out = []
    for x in pt:
        if isinstance(x, Fraction):
            out.append(x)
        else:
            if x.logs:
                raise AssertionError("rational witness expected")
            out.append(x.rat)
    return vec(out)


CURVE_ARGMAX_CAP = 12


def _component_modes(fam: Family):
    """Exhaustive partition of direction space by this family's sup shape.

    Each mode = (rows(tau), sup_point, kept_ks) with kept_ks "all" or a
    tuple; the sentinel mode ("overflow", rows) marks quadratic argmax cells
    beyond the cap.
    """
    if isinstance(fam, RayFamily):
        u = fam.step
        yield ([Row(u, Fraction(0), EQ)], fam.base, "all")
        yield ([Row(u, Fraction(0), LT)], fam.atom_point(1), (1,))
        return
    v, u = fam.quad, fam.lin
    yield ([Row(v, Fraction(0), EQ), Row(u, Fraction(0), EQ)], fam.base, "all")
    yield ([Row(v, Fraction(0), EQ), Row(u, Fraction(0), LT)], fam.atom_point(1), (1,))
    for k0 in range(1, CURVE_ARGMAX_CAP + 1):
        rows = [Row(v, Fraction(0), LT)]
        if k0 > 1:
            rows.append(Row(sub(fam.atom_point(k0 - 1), fam.atom_point(k0)), Fraction(0), LT))
        rows.append(Row(sub(fam.atom_point(k0 + 1), fam.atom_point(k0)), Fraction(0), LT))
        yield (rows, fam.atom_point(k0), (k0,))
        tie = [Row(v, Fraction(0), LT),
               Row(sub(fam.atom_point(k0), fam.atom_point(k0 + 1)), Fraction(0), EQ)]
        if k0 > 1:
            tie.append(Row(sub(fam.atom_point(k0 - 1), fam.atom_point(k0)), Fraction(0), LT))
        yield (tie, fam.atom_point(k0), (k0, k0 + 1))
    over = [Row(v, Fraction(0), LT),
            Row(sub(fam.atom_point(CURVE_ARGMAX_CAP),
                    fam.atom_point(CURVE_ARGMAX_CAP + 1)), Fraction(0), LE)]
    yield (over, None, "overflow")


def _curve_candidates(node: FaceHandle, target: FaceHandle, extra_rows: list[Row]):
    """Candidate cells for measures with curve families: a product of per-
    component sup modes and at-max flags, each a strict LP over tau."""
    m = node.measure
    d = m.dimension
    target_finite = {a.point for a in target.measure.atoms}
    target_fams = {fam_identity(f) for f in target.measure.families}

    atom_flags = []
    for a in m.atoms:
        atom_flags.append((True,) if a.point in target_finite else (True, False))
    fam_mode_lists = []
    for fam in m.families:
        fid = fam_identity(fam)
        modes = list(_component_modes(fam))
        options = []
        for mode in modes:
            rows, sup_point, kept = mode
            if kept == "overflow":
                options.append((mode, None))
                continue
            kept_pts = (None if kept == "all"
                        else {fam.atom_point(k) for k in kept})
            needed = fid in target_fams or any(
                fam.atom_point(k) in target_finite for k in range(1, CURVE_ARGMAX_CAP + 2))
            at_max_choices: tuple[bool, ...]
            if fid in target_fams:
                at_max_choices = (True,) if kept == "all" else ()
            elif needed:
                # specific family atoms appear in the target; the kept set
                # must cover them when at max, and dropping them is illegal
                req = {fam.atom_point(k) for k in range(1, CURVE_ARGMAX_CAP + 2)
                       if fam.atom_point(k) in target_finite}
                if kept == "all" or (kept_pts is not None and req <= kept_pts):
                    at_max_choices = (True,)
                else:
                    at_max_choices = ()
            else:
                at_max_choices = (True, False)
            for am in at_max_choices:
                options.append((mode, am))
        fam_mode_lists.append(options)

    for atom_pick in itertools.product(*atom_flags):
        for fam_pick in itertools.product(*fam_mode_lists):
            rows = list(extra_rows)
            included: list[Vec] = [a.point for a, keep in zip(m.atoms, atom_pick) if keep]
            excluded: list[Vec] = [a.point for a, keep in zip(m.atoms, atom_pick) if not keep]
            overflow = False
            for (mode, am) in fam_pick:
                mrows, sup_point, kept = mode
                rows += mrows
                if kept == "overflow":
                    overflow = True
                elif am:
                    included.append(sup_point)
                else:
                    excluded.append(sup_point)
            if overflow:
                pt = strict_feasible_point(d, rows)
                if pt is not None:
                    yield None, {"kind": "curve-cell", "note": "argmax cap"}
                continue
            if not included:
                continue
            # the cell must expose a proper face: not everything at max whole
            keeps_everything = (all(atom_pick)
                                and all(am and mode[2] == "all" for mode, am in fam_pick))
            if keeps_everything:
                continue
            ref = included[0]
            for other in included[1:]:
                rows.append(Row(sub(other, ref), Fraction(0), EQ))
            for low in excluded:
                rows.append(Row(sub(low, ref), Fraction(0), LT))
            pt = strict_feasible_point(d, rows)
            if pt is not None:
                yield _rationalize(pt), {"kind": "curve-cell"}


def accessible_faces(measure: MixedMeasure, xi: ParamSet) -> list[tuple[FaceHandle, AccessResult]]:
    """All accessible faces with witness chains; polyhedral measures only."""
    out = []
    for f in enumerate_faces(measure):
        res = is_accessible(measure, f, xi)
        if res.accessible:
            out.append((f, res))
    return out
