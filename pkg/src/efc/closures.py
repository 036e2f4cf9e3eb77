"""Closure decision procedures and constructive sequences.

Variation-closure membership reduces to accessibility of the member's face
plus an exact parameter membership in the projected closure; the forward
information closure reduces to cl(Xi) ∩ Theta; the reverse one reduces to a
variation-closure query against Xi intersected with the translate of the
integrable-direction subspace.  Witnesses are built from the chain
construction: ray shifts along chain vectors drive the face mass to one
while the conditioned member stays pinned exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from mpmath import iv, mpf

from . import errors
from .family import (IntegrabilityProfile, ParamSet, ParamVec, _frac_from_mpf,
                     divergence_same_measure, domain_contains, integrability,
                     log_partition, param_as_rational, project_param, pvec,
                     theta_space, tilted_sum_rel, variation_distance)
from .faces import (AccessResult, FaceHandle, Member, expose, enumerate_faces,
                    face_contains, is_accessible, is_adapted, member, top_face)
from .geometry import (AffineFlat, Ineq, Polyhedron, Vec, norm_sq, primitive,
                       ri_query, strict_feasible_point, vec, zeros)
from .geometry.simplex import EQ, LE, LT, Row
from .intervals import certify
from .measures import MixedMeasure
from .scalars import Scalar, rat, sign_of


def _pdot(normal: Vec, x: ParamVec) -> Scalar:
    out: Scalar = Fraction(0)
    for a, c in zip(normal, x):
        if a != 0:
            out = out + c * a
    return out


# -- semi-open set comparison ---------------------------------------------------

def _complement_cells(dim: int, row) -> list[Polyhedron]:
    if isinstance(row, Ineq):
        neg = tuple(-c for c in row.normal)
        return [Polyhedron(dim, (Ineq(neg, -row.offset, not row.strict),))]
    neg = tuple(-c for c in row.normal)
    return [Polyhedron(dim, (Ineq(row.normal, row.offset, True),)),
            Polyhedron(dim, (Ineq(neg, -row.offset, True),))]


def _subtract(piece: Polyhedron, cover: Polyhedron) -> list[Polyhedron]:
    out = []
    for row in list(cover.ineqs) + list(cover.eqs):
        for cell in _complement_cells(piece.dim, row):
            cand = piece.intersect(cell)
            if cand.some_point() is not None:
                out.append(cand)
    return out


def semiopen_union_covers(cover: Sequence[Polyhedron], target: Sequence[Polyhedron]) -> bool:
    """Is the union of targets contained in the union of covers?  Exact."""
    work = [t for t in target if t.some_point() is not None]
    for c in cover:
        nxt = []
        for w in work:
            nxt.extend(_subtract(w, c))
        work = nxt
        if not work:
            return True
    return not work


# -- extension catalog -------------------------------------------------------

@dataclass(frozen=True)
class CatalogEntry:
    face: FaceHandle
    theta_closure: Polyhedron     # cl(Theta_F)
    exhaustive: bool              # pi_F(Theta) = Theta_F as sets


def extension_catalog(measure: MixedMeasure,
                      faces: Optional[Sequence[FaceHandle]] = None) -> list[CatalogEntry]:
    if faces is None:
        faces = enumerate_faces(measure)
    theta = theta_space(measure)
    out = []
    for f in faces:
        tf = theta_space(f.measure)
        flat0 = AffineFlat(zeros(measure.dimension), f.flat.basis)
        proj_pieces = [_fm_semi(p, flat0) for p in theta.pieces]
        exhaustive = semiopen_union_covers(proj_pieces, list(tf.pieces))
        out.append(CatalogEntry(f, tf.closure, exhaustive))
    return out


def _fm_semi(piece: Polyhedron, flat: AffineFlat) -> Polyhedron:
    from .geometry import fm_project
    return fm_project(piece, flat)


# -- closure verdicts ---------------------------------------------------------

@dataclass
class Verdict:
    kind: str                     # variation | I | rI
    decision: object              # True | False | "unknown"
    member_chain: tuple
    witness: Optional[dict] = None
    refutation: Optional[dict] = None
    extra: dict = field(default_factory=dict)


def in_variation_closure(measure: MixedMeasure, xi: ParamSet, mem: Member,
                         eps: Fraction = Fraction(1, 10**9),
                         neat_prefix: int = 3) -> Verdict:
    theta = mem.theta
    f = mem.face
    if xi.is_empty:
        return Verdict("variation", False, f.chain,
                       refutation={"reason": "empty parameter set"})
    try:
        acc = is_accessible(measure, f, xi)
    except errors.SearchIncomplete as e:
        return Verdict("variation", "unknown", f.chain,
                       refutation={"reason": str(e)})
    if not acc.accessible:
        steps = None
        if f.chain:
            ok, reports = is_adapted(measure, f.chain, xi)
            steps = [{"index": r.index, "in_recession": r.in_recession} for r in reports]
        return Verdict("variation", False, f.chain, refutation={
            "reason": "face not accessible", "search": acc.refutation,
            "own_chain_steps": steps})
    cl_pf = xi.closure_projected(f.flat)
    if not cl_pf.contains(theta):
        return Verdict("variation", False, f.chain, refutation={
            "reason": "parameter outside the projected closure",
            "witness_chain": acc.chain})
    wit = {"chain": acc.chain, "projected_closure_member": True}
    if neat_prefix > 0 and xi.ri_projected(f.flat).contains(theta):
        stages = neat_sequence(measure, xi, f, theta, neat_prefix, access=acc)
        wit["neat_prefix"] = [s.param for s in stages]
        wit["neat_defects"] = [s.defect_bound for s in stages]
    return Verdict("variation", True, f.chain, witness=wit)


@dataclass(frozen=True)
class ClosureComponent:
    face: FaceHandle
    chain: tuple
    parameters: Polyhedron        # cl(pi_F(Xi))
    theta_closure: Polyhedron     # cl(Theta_F)


_CLOSURE_MEMO: dict = {}


def variation_closure(measure: MixedMeasure, xi: ParamSet) -> list[ClosureComponent]:
    key = (measure, xi)
    hit = _CLOSURE_MEMO.get(key)
    if hit is not None:
        return list(hit)
    out = []
    if xi.is_empty:
        return out
    for f in enumerate_faces(measure):
        acc = is_accessible(measure, f, xi)
        if not acc.accessible:
            continue
        out.append(ClosureComponent(f, tuple(acc.chain or ()),
                                    xi.closure_projected(f.flat),
                                    theta_space(f.measure).closure))
    if len(_CLOSURE_MEMO) < 512:
        _CLOSURE_MEMO[key] = tuple(out)
    return out


def in_I_closure(measure: MixedMeasure, xi: ParamSet, mem: Member) -> Verdict:
    top = top_face(measure)
    if mem.face.key != top.key:
        return Verdict("I", False, mem.face.chain,
                       refutation={"reason": "member lies in a proper component"})
    if xi.is_empty:
        return Verdict("I", False, (), refutation={"reason": "empty parameter set"})
    theta = mem.theta
    in_cl = xi.closure.contains(theta)
    in_theta = theta_space(measure).contains(theta)
    if in_cl and in_theta:
        return Verdict("I", True, (), witness={"closure_member": True})
    return Verdict("I", False, (), refutation={
        "reason": "parameter outside cl(Xi) ∩ Theta",
        "in_closure": in_cl, "in_theta": in_theta})


def in_rI_closure(measure: MixedMeasure, xi: ParamSet, mem: Member,
                  eps: Fraction = Fraction(1, 10**9)) -> Verdict:
    prof = integrability(mem.face.measure, mem.theta, eps)
    xi_restricted = xi.restrict_to_affine(mem.theta, prof.constraints)
    inner = in_variation_closure(measure, xi_restricted, mem, eps)
    verdict = Verdict("rI", inner.decision, mem.face.chain,
                      witness=inner.witness, refutation=inner.refutation)
    verdict.extra = {
        "has_mean": prof.full,
        "integrability_constraints": prof.constraints,
        "finite_divergence_shortcut": _finite_divergence_shortcut(xi, mem, prof),
    }
    return verdict


def _finite_divergence_shortcut(xi: ParamSet, mem: Member,
                                prof: IntegrabilityProfile) -> bool:
    """Is there a parameter in ri(Xi) ∩ (theta + M(P))?"""
    if xi.is_empty:
        return False
    c = xi.relative_interior.poly
    rows = [Row(i.normal, i.offset, LT) for i in c.ineqs]
    rows += [Row(e.normal, e.offset, EQ) for e in c.eqs]
    for w in prof.constraints:
        rows.append(Row(w, _pdot(w, mem.theta), EQ))
    return strict_feasible_point(xi.measure.dimension, rows) is not None


# -- neat and witness sequences --------------------------------------------------

@dataclass(frozen=True)
class NeatStage:
    param: ParamVec
    defect_bound: Fraction       # certified bound on 1 - Q(cl F)
    shifts: tuple[int, ...]      # ray multiples per chain level


class ChainLifter:
    """Incrementally builds parameters along an adapted chain: lift the
    current target into the relative interior at each level and push mass
    onto the next face by integer multiples of the chain vector."""

    def __init__(self, measure: MixedMeasure, xi: ParamSet, face: FaceHandle,
                 access: AccessResult):
        self.measure = measure
        self.xi = xi
        self.face = face
        self.chain_faces = access.faces
        self.taus = access.chain
        self.m = len(self.taus)
        self.ri_rows = [xi.ri_projected(fh.flat) for fh in self.chain_faces]
        self.k_state = [0] * self.m

    def stage(self, theta: ParamVec, eta: Fraction) -> NeatStage:
        """One parameter with per-level certified mass defect <= eta."""
        w = theta
        shifts = []
        for i in range(self.m - 1, -1, -1):
            lifted = _lift_into(self.ri_rows[i], self.chain_faces[i + 1].flat, w)
            k = self.k_state[i] + 1
            inc = 1
            while True:
                cand = tuple(wc + k * tc for wc, tc in zip(lifted, self.taus[i]))
                defect = _mass_defect(self.chain_faces[i].measure,
                                      self.chain_faces[i + 1].measure, cand, eta)
                if defect <= eta:
                    break
                inc *= 2
                k += inc
            self.k_state[i] = k
            shifts.append(k)
            w = cand
        return NeatStage(w, eta * self.m, tuple(reversed(shifts)))


def neat_sequence(measure: MixedMeasure, xi: ParamSet, face: FaceHandle,
                  theta, count: int,
                  access: Optional[AccessResult] = None) -> list[NeatStage]:
    """Parameters in ri(Xi) whose conditionings on the face closure equal the
    target member exactly, with certified face-mass defects halving per stage."""
    theta = pvec(theta)
    if xi.is_empty:
        raise errors.RelativeBoundaryDegenerate("empty parameter set")
    if not xi.ri_projected(face.flat).contains(theta):
        raise errors.ThetaNotInRelativeInterior(
            "the target parameter must lie in the projected relative interior")
    if access is None:
        access = is_accessible(measure, face, xi)
    if not access.accessible:
        raise errors.InvalidInput("face is not accessible from this parameter set")
    lifter = ChainLifter(measure, xi, face, access)
    return [lifter.stage(theta, Fraction(1, 2**j)) for j in range(1, count + 1)]


def _lift_into(ri_poly: Polyhedron, sub_flat: AffineFlat, w: ParamVec) -> ParamVec:
    rows = [Row(i.normal, i.offset, LT if i.strict else LE) for i in ri_poly.ineqs]
    rows += [Row(e.normal, e.offset, EQ) for e in ri_poly.eqs]
    for b in sub_flat.basis:
        rows.append(Row(b, _pdot(b, w), EQ))
    pt = strict_feasible_point(ri_poly.dim, rows)
    assert pt is not None, "relative interiors project onto relative interiors"
    return pvec(pt)


def _mass_defect(big: MixedMeasure, small: MixedMeasure, theta: ParamVec,
                 eta: Fraction) -> Fraction:
    """Certified upper bound on 1 - Z_small(theta)/Z_big(theta)."""
    from .intervals import bits_for, prec_bits
    rel = rat(eta) / 8
    znum = tilted_sum_rel(small, theta, rel)
    zden = tilted_sum_rel(big, theta, rel)
    with prec_bits(bits_for(rel)):
        lo = (znum / zden).a
    return max(Fraction(0), 1 - _frac_from_mpf(lo))


@dataclass(frozen=True)
class WitnessStage:
    param: ParamVec
    distance_bound: Fraction     # certified bound on |Q_param - target|


def _dominated_member_gap(face_measure: MixedMeasure, theta_n: ParamVec,
                          theta: ParamVec, eps: Fraction):
    """Certified bound on |Q_theta_n - Q_theta| when the tilt e^{<delta,x>}
    is pointwise <= 1 on the atoms: then the gap is at most
    2 (1 - Z(theta_n)/Z(theta)).  None when the criterion fails."""
    delta = tuple(a - b for a, b in zip(theta_n, theta))
    for a in face_measure.atoms:
        if sign_of(_pdot(a.point, delta)) > 0:
            return None
    for fam in face_measure.families:
        dirs = fam.directions
        if any(sign_of(_pdot(d, delta)) > 0 for d in dirs):
            return None
        first = fam.atom_point(1)
        if sign_of(_pdot(first, delta)) > 0:
            return None
    from .intervals import bits_for, prec_bits
    rel = rat(eps) / 8
    zn = tilted_sum_rel(face_measure, theta_n, rel)
    z0 = tilted_sum_rel(face_measure, theta, rel)
    with prec_bits(bits_for(rel)):
        lo = (zn / z0).a
    return 2 * max(Fraction(0), 1 - _frac_from_mpf(lo))


def witness_sequence(measure: MixedMeasure, xi: ParamSet, mem: Member,
                     count: int = 20,
                     stop_at: Optional[Fraction] = None) -> list[WitnessStage]:
    """Parameters in Xi whose members converge in variation to the target;
    certified distance bounds are non-increasing.  Stops early once the
    bound reaches stop_at."""
    f = mem.face
    theta = mem.theta
    verdict = in_variation_closure(measure, xi, mem, neat_prefix=0)
    if verdict.decision is not True:
        raise errors.InvalidInput("target is not in the variation closure")
    acc = is_accessible(measure, f, xi)
    lifter = ChainLifter(measure, xi, f, acc)
    direct = xi.ri_projected(f.flat).contains(theta)
    z = None
    if not direct:
        z = pvec(ri_query(xi.closure_projected(f.flat)).point)
    stages: list[WitnessStage] = []
    best: Optional[WitnessStage] = None
    for n in range(1, count + 1):
        eta = Fraction(1, 2**n)
        if direct:
            inner_theta = theta
            inner_gap = Fraction(0)
        else:
            t = Fraction(1, 2**n)
            inner_theta = tuple(th * (1 - t) + zc * t for th, zc in zip(theta, z))
            gap_eps = max(Fraction(1, 2**(n + 3)), Fraction(1, 10**9))
            inner_gap = _dominated_member_gap(f.measure, inner_theta, theta, gap_eps)
            if inner_gap is None:
                gap_iv = variation_distance(f.measure, inner_theta, f.measure, theta,
                                            gap_eps)
                inner_gap = _frac_from_mpf(gap_iv.b)
        stage = lifter.stage(inner_theta, eta)
        bound = 2 * stage.defect_bound + inner_gap if lifter.m else inner_gap
        cand = WitnessStage(stage.param, bound)
        if best is None or cand.distance_bound < best.distance_bound:
            best = cand
        stages.append(best)
        if stop_at is not None and best.distance_bound <= stop_at:
            break
    return stages


# -- sequence classification -------------------------------------------------------

@dataclass
class SequenceReport:
    alternative: str              # interior | boundary | undetermined
    limit_param: Optional[ParamVec] = None
    direction: Optional[Vec] = None
    face_chain: Optional[tuple] = None
    limit_member: Optional[Member] = None
    diagnostics: dict = field(default_factory=dict)


INTERIOR_CAUCHY = Fraction(1, 10**9)
BOUNDARY_NORMSQ = Fraction(2500)
DIRECTION_CAUCHY = 1e-6


def classify_sequence(measure: MixedMeasure, params: Sequence,
                      eps: Fraction = Fraction(1, 10**9)) -> SequenceReport:
    """Finite-prefix diagnostic for the interior/boundary dichotomy of
    parameter sequences; evidence, not proof."""
    params = [pvec(p) for p in params]
    ts = theta_space(measure)
    for p in params:
        if not ts.contains(p):
            raise errors.DomainViolation("sequence parameter outside Theta")
    n = len(params)
    if n < 3:
        return SequenceReport("undetermined", diagnostics={"reason": "prefix too short"})
    rationals = all(all(isinstance(c, Fraction) for c in p) for p in params)
    if not rationals:
        return SequenceReport("undetermined", diagnostics={"reason": "tilted parameters"})
    window = params[max(0, n - 10):]
    diag: dict = {}

    gap = max((max(abs(a - b) for a, b in zip(p, q))
               for p, q in itertools.combinations(window, 2)), default=Fraction(0))
    diag["window_gap"] = float(gap)
    interior = gap <= INTERIOR_CAUCHY

    norms = [norm_sq(param_as_rational(p)) for p in params]
    diag["final_norm_sq"] = float(norms[-1])
    half = norms[n // 2:]
    nondec = all(half[i] <= half[i + 1] for i in range(len(half) - 1))
    q1 = max(norms[: max(1, n // 4)])
    growth = norms[-1] > 0 and norms[-1] >= 4 * q1
    dirs = []
    for p in window:
        v = param_as_rational(p)
        nn = norm_sq(v)
        if nn > 0:
            s = 1.0 / float(nn) ** 0.5
            dirs.append(tuple(float(c) * s for c in v))
    dir_cauchy = bool(dirs) and all(
        max(abs(a - b) for a, b in zip(u, w)) <= DIRECTION_CAUCHY
        for u, w in itertools.combinations(dirs, 2))
    boundary = norms[-1] >= BOUNDARY_NORMSQ and nondec and growth and dir_cauchy

    assert not (interior and boundary) or gap == 0  # constant far-out sequences
    if interior and boundary:
        return SequenceReport("undetermined",
                              diagnostics={**diag, "reason": "conflicting signals"})
    if interior:
        last, prev = params[-1], params[-2]
        l_gap = abs(float(mpf((log_partition(measure, last, eps)
                               - log_partition(measure, prev, eps)).mid)))
        vd = variation_distance(measure, last, measure, prev, Fraction(1, 10**5))
        diag["log_partition_gap"] = l_gap
        diag["variation_gap_ub"] = float(mpf(vd.b))
        if l_gap <= 1e-6:
            return SequenceReport("interior", limit_param=last, diagnostics=diag)
        return SequenceReport("undetermined",
                              diagnostics={**diag, "reason": "log-partition drift"})
    if boundary:
        tau = primitive(param_as_rational(params[-1]))
        try:
            g = expose(top_face(measure), tau)
        except errors.EfcError as e:
            return SequenceReport("undetermined",
                                  diagnostics={**diag, "reason": f"exposure failed: {e}"})
        lim = member(g, project_param(params[-1], g.flat.basis))
        return SequenceReport("boundary", direction=tau, face_chain=g.chain,
                              limit_member=lim, diagnostics=diag)
    return SequenceReport("undetermined", diagnostics=diag)


# -- minimal dominated faces and extension sequences ---------------------------------

def minimal_dominated_face(measure: MixedMeasure, subject) -> FaceHandle:
    """Smallest face whose closure carries all mass of the subject.

    Members put positive mass on every atom of their face, so their own face
    is the minimum; explicit atom supports search the enumerated lattice."""
    if isinstance(subject, Member):
        return subject.face
    points = [vec(p) for p in subject]
    top = top_face(measure)

    def atoms_cover(handle: FaceHandle, ps) -> bool:
        fin = {a.point for a in handle.measure.atoms}
        for p in ps:
            if p in fin:
                continue
            region = Polyhedron.from_flat(AffineFlat(p, ()))
            if not any(not handle.measure.family_kset(fam, region).is_empty
                       for fam in handle.measure.families):
                return False
        return True

    if not atoms_cover(top, points):
        raise errors.NotDominated("support contains a non-atom of the base measure")
    candidates = [f for f in enumerate_faces(measure) if atoms_cover(f, points)]
    best = min(candidates, key=lambda f: f.dim)
    assert all(face_contains(c, best) for c in candidates)
    return best


@dataclass
class ExtSequenceReport:
    minimal_face_chain: tuple
    containment_from: Optional[int]     # first index from which F ⊆ F_n holds on
    face_containment_violated: bool
    conditioned_classification: SequenceReport
    divergence_trace: list              # per n: ("finite", interval) or ("+inf", None)
    eventually_finite: bool
    finite_from: Optional[int]
    finiteness_matches_subspace_test: bool


def ext_sequence_analysis(measure: MixedMeasure, members_seq: Sequence[Member],
                          target: Member,
                          eps: Fraction = Fraction(1, 10**9)) -> ExtSequenceReport:
    f = minimal_dominated_face(measure, target)
    contained = [face_contains(q.face, f) for q in members_seq]
    start = None
    for i in range(len(contained)):
        if all(contained[i:]):
            start = i
            break
    violated = start is None
    cond_params = []
    if not violated:
        cond_params = [project_param(q.theta, f.flat.basis) for q in members_seq[start:]]
    cls = (classify_sequence(f.measure, cond_params, eps)
           if len(cond_params) >= 3 else SequenceReport("undetermined"))
    prof = integrability(f.measure, target.theta, eps)
    trace = []
    finite_flags = []
    subspace_flags = []
    for q in members_seq:
        fin, val = divergence(target, q, eps)
        trace.append((fin, val))
        finite_flags.append(fin == "finite")
        diff = tuple(a - b for a, b in zip(q.theta, target.theta))
        subspace_flags.append(prof.contains(diff))
    finite_from = None
    for i in range(len(finite_flags)):
        if all(finite_flags[i:]):
            finite_from = i
            break
    return ExtSequenceReport(
        minimal_face_chain=f.chain,
        containment_from=start,
        face_containment_violated=violated,
        conditioned_classification=cls,
        divergence_trace=trace,
        eventually_finite=finite_from is not None,
        finite_from=finite_from,
        finiteness_matches_subspace_test=finite_flags == subspace_flags,
    )


# -- divergences between members ------------------------------------------------------

def divergence(p: Member, q: Member, eps: Fraction = Fraction(1, 10**9)):
    """D(p || q) across components: ('finite', interval) or ('+inf', None)."""
    if not face_contains(q.face, p.face):
        return ("+inf", None)
    phi = project_param(q.theta, p.face.flat.basis)
    same = divergence_same_measure(p.face.measure, p.theta, phi, rat(eps) / 2)
    if same[0] != "finite" or p.face.key == q.face.key:
        return same
    mass_log = _log_mass_ratio(p.face.measure, q.face.measure, q.theta, rat(eps) / 2)
    return ("finite", same[1] - mass_log)


def _log_mass_ratio(small: MixedMeasure, big: MixedMeasure, theta: ParamVec,
                    eps: Fraction):
    """ln(Z_small(theta) / Z_big(theta)) certified to width eps."""
    from .intervals import bits_for, prec_bits
    rel = rat(eps) / 8
    for _ in range(60):
        num = tilted_sum_rel(small, theta, rel)
        den = tilted_sum_rel(big, theta, rel)
        with prec_bits(bits_for(rel)):
            out = iv.log(num / den)
        if float(mpf(out.delta.b)) <= float(eps):
            return out
        rel /= 16
    raise errors.PrecisionUnreachableError("mass-ratio certification stalled")


def member_variation_distance(p: Member, q: Member, eps: Fraction = Fraction(1, 10**9)):
    return variation_distance(p.face.measure, p.theta, q.face.measure, q.theta, eps)
