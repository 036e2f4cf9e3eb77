"""Seeded verification suites and the pointwise inequality checkers.

Every check uses conservative interval sides: a violation is reported only
when the enclosures certify it.  All randomness comes from one seeded
generator and the samples are exact rationals.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from mpmath import iv, mpf

from . import errors
from .closures import (classify_sequence, divergence, member_variation_distance,
                       variation_closure, witness_sequence)
from .family import (ParamSet, ParamVec, _frac_from_mpf, directional_derivative,
                     domain_contains, integrability, log_partition,
                     param_as_rational, project_param, pvec, theta_space,
                     tilted_sum, variation_distance)
from .faces import Member, member, top_face
from .geometry import (AffineFlat, Ineq, Polyhedron, Vec, dot, generators,
                       norm_sq, project_onto_span, ri_query, scale, sub, vec)
from .intervals import from_fraction, from_scalar, width
from .measures import MixedMeasure, measure_flat, support_polyhedron
from .scalars import rat


# -- probes and pointwise inequalities -------------------------------------------

@dataclass(frozen=True)
class BoundProbe:
    """An interior point with margins for the support-distance inequalities."""

    a: Vec
    s: Fraction
    r: Fraction
    rho: object            # interval enclosing the distance to the support boundary


def bound_probe(measure: MixedMeasure, a: Vec, s: Fraction, r: Fraction) -> BoundProbe:
    a = vec(a)
    s, r = rat(s), rat(r)
    poly = support_polyhedron(measure).canonical_full()
    riq = ri_query(poly)
    if not riq.contains(a):
        raise errors.ProbeOutOfRange("probe base point must lie in ri of the support")
    basis = measure_flat(measure).basis
    rho = None
    for iq in poly.ineqs:
        slack = rat(iq.offset) - dot(iq.normal, a)
        n_in = project_onto_span(iq.normal, basis)
        nn = norm_sq(n_in)
        if nn == 0:
            continue
        dist = from_fraction(slack) / iv.sqrt(from_fraction(nn))
        rho = dist if rho is None else iv.mpf([min(rho.a, dist.a), min(rho.b, dist.b)])
    if rho is None:
        rho = iv.mpf("+inf")
    if not (0 < r < s):
        raise errors.ProbeOutOfRange("need 0 < r < s")
    if not from_fraction(s).b < rho.a:
        raise errors.ProbeOutOfRange("need s < rho(a), certified")
    return BoundProbe(a, s, r, rho)


def _halfspace_mass(measure: MixedMeasure, theta: Vec, a: Vec, s_norm) -> tuple:
    """Enclosure of mu({x : <theta, x - a> >= s * ||theta||}).

    The threshold is an interval; atoms in the uncertain band widen the
    enclosure, never bias it.
    """
    hi = _frac_from_mpf(s_norm.b)
    lo = _frac_from_mpf(s_norm.a)
    base = dot(theta, a)
    d = measure.dimension
    neg = tuple(-c for c in theta)
    region_in = Polyhedron(d, (Ineq(neg, -(base + hi)),))          # <theta,x> >= base+hi
    region_out_c = Polyhedron(d, (Ineq(neg, -(base + lo), True),))  # <theta,x> > base+lo
    eps = Fraction(1, 10**9)
    mass_in = tilted_sum(measure, pvec([0] * d), eps, region=region_in)
    mass_ge_lo = tilted_sum(measure, pvec([0] * d), eps, region=region_out_c)
    return iv.mpf([mass_in.a, mass_ge_lo.b])


@dataclass
class InequalityReport:
    samples: int
    support_bound_checked: int      # pointwise partition-sum lower bound
    support_bound_violations: int
    mean_shift_checked: int         # pointwise mean-vs-margin bound
    mean_shift_violations: int
    pinsker_checked: int
    pinsker_violations: int
    limit_margin_checked: int       # boundary-sequence mean margin
    limit_margin_violations: int
    notes: list = field(default_factory=list)


def inequality_suite(measure: MixedMeasure, probe: BoundProbe, samples: int,
                     seed: int, eps: Fraction = Fraction(1, 10**9)) -> InequalityReport:
    rng = random.Random(seed)
    rep = InequalityReport(samples, 0, 0, 0, 0, 0, 0, 0, 0)
    ts = theta_space(measure)
    thetas = [sample_param(measure, ts, rng) for _ in range(samples - 1)]
    thetas.append(tuple(Fraction(0) for _ in range(measure.dimension)))  # degenerate
    total_mass = tilted_sum(measure, pvec([0] * measure.dimension), eps)
    for th in thetas:
        norm = iv.sqrt(from_fraction(norm_sq(th)))
        s_norm = from_fraction(probe.s) * norm
        mass_a = _halfspace_mass(measure, th, probe.a, s_norm)
        lam = log_partition(measure, pvec(th), eps)
        lhs8 = iv.exp(lam - from_fraction(dot(th, probe.a)))
        rhs8 = iv.exp(s_norm) * mass_a
        rep.support_bound_checked += 1
        if lhs8.b < rhs8.a:
            rep.support_bound_violations += 1

        prof = integrability(measure, pvec(th), eps)
        if prof.full:
            lhs7 = iv.mpf(0)
            for j in range(measure.dimension):
                if th[j] != 0:
                    lhs7 += from_fraction(th[j]) * (prof.mean[j] - from_fraction(probe.a[j]))
            r_norm = from_fraction(probe.r) * norm
            c_const = total_mass / mass_a
            rhs7 = r_norm - c_const * iv.exp(-s_norm) * (r_norm * iv.exp(r_norm) + 1)
            rep.mean_shift_checked += 1
            if lhs7.b < rhs7.a:
                rep.mean_shift_violations += 1
    # Pinsker on random pairs
    pair_count = min(samples, 50)
    for _ in range(pair_count):
        th1 = sample_param(measure, ts, rng)
        th2 = sample_param(measure, ts, rng)
        vd = variation_distance(measure, pvec(th1), measure, pvec(th2), Fraction(1, 10**7))
        dres = divergence(member(top_face(measure), pvec(th1)),
                          member(top_face(measure), pvec(th2)), Fraction(1, 10**7))
        rep.pinsker_checked += 1
        if dres[0] == "finite" and (vd.a) ** 2 > 2 * dres[1].b:
            rep.pinsker_violations += 1
    # boundary-sequence margin (bounded supports only)
    if not measure.families:
        for _ in range(3):
            tau = _sample_direction(measure, rng)
            if tau is None:
                break
            params = [scale(tau, Fraction(n)) for n in range(1, 61)]
            try:
                cls = classify_sequence(measure, params)
            except errors.EfcError:
                continue
            if cls.alternative != "boundary":
                continue
            prof = integrability(measure, pvec(params[-1]), eps)
            lhs = iv.mpf(0)
            nt = iv.sqrt(from_fraction(norm_sq(tau)))
            for j in range(measure.dimension):
                if tau[j] != 0:
                    lhs += from_fraction(tau[j]) * (prof.mean[j] - from_fraction(probe.a[j]))
            lhs = lhs / nt
            rep.limit_margin_checked += 1
            if lhs.b < probe.rho.a:
                rep.limit_margin_violations += 1
    return rep


def sample_param(measure: MixedMeasure, ts: ParamSet, rng: random.Random,
                 span: int = 6) -> Vec:
    """Random rational parameter in Theta (exact; rejection-sampled)."""
    basis = measure_flat(measure).basis
    d = measure.dimension
    for _ in range(500):
        raw = tuple(Fraction(rng.randint(-3 * span, 3 * span), rng.randint(1, 7))
                    for _ in range(d))
        cand = project_onto_span(raw, basis)
        if ts.contains(pvec(cand)):
            return vec(cand)
    # fall back to a relative-interior point
    return vec(param_as_rational(ts.ri_point()))


def _sample_direction(measure: MixedMeasure, rng: random.Random) -> Optional[Vec]:
    basis = measure_flat(measure).basis
    if not basis:
        return None
    d = measure.dimension
    for _ in range(50):
        raw = tuple(Fraction(rng.randint(-5, 5)) for _ in range(d))
        cand = project_onto_span(raw, basis)
        if norm_sq(cand) > 0:
            return vec(cand)
    return None


# -- CLI verification suites ---------------------------------------------------------

@dataclass
class SuiteResult:
    suite: str
    trials: int
    checked: int
    failures: int
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.failures == 0 and self.checked > 0


def suite_pinsker(measure: MixedMeasure, trials: int, seed: int,
                  eps: Fraction = Fraction(1, 10**7)) -> SuiteResult:
    rng = random.Random(seed)
    ts = theta_space(measure)
    top = top_face(measure)
    checked = failures = 0
    for _ in range(trials):
        th1 = pvec(sample_param(measure, ts, rng))
        th2 = pvec(sample_param(measure, ts, rng))
        vd = variation_distance(measure, th1, measure, th2, eps)
        dres = divergence(member(top, th1), member(top, th2), eps)
        checked += 1
        if dres[0] == "finite" and (vd.a) ** 2 > 2 * dres[1].b:
            failures += 1
    return SuiteResult("pinsker", trials, checked, failures)


FD_STEP = Fraction(1, 10**4)
FD_REL_TOL = 1e-5
FD_MAGNITUDE_FLOOR = 0.05


def suite_lemma4(measure: MixedMeasure, trials: int, seed: int) -> SuiteResult:
    """Directional derivatives against central finite differences of the
    log-partition function at interior points."""
    rng = random.Random(seed)
    ts = theta_space(measure)
    checked = failures = 0
    skipped = 0
    lam_eps = Fraction(1, 10**13)
    attempts = 0
    while checked < trials and attempts < trials * 60:
        attempts += 1
        th = sample_param(measure, ts, rng, span=2)
        tau = _sample_direction(measure, rng)
        if tau is None:
            break
        plus = pvec(tuple(t + FD_STEP * c for t, c in zip(th, tau)))
        minus = pvec(tuple(t - FD_STEP * c for t, c in zip(th, tau)))
        if not (ts.ri_contains(pvec(th)) and ts.ri_contains(plus) and ts.ri_contains(minus)):
            continue
        fd = (log_partition(measure, plus, lam_eps)
              - log_partition(measure, minus, lam_eps)) / (2 * from_fraction(FD_STEP))
        mag = abs(float(mpf(fd.mid)))
        if mag < FD_MAGNITUDE_FLOOR:
            skipped += 1
            continue
        kind, dd = directional_derivative(measure, pvec(th), tau, Fraction(1, 10**9))
        if kind != "finite":
            continue
        gap = abs(dd - fd)
        checked += 1
        if float(mpf(gap.b)) > FD_REL_TOL * mag:
            failures += 1
    return SuiteResult("lemma4", trials, checked, failures,
                       {"skipped_near_zero": skipped})


def direct_divergence_series(measure: MixedMeasure, theta: ParamVec, phi: ParamVec,
                             eps: Fraction) -> object:
    """Oracle: sum p(x) (ln p(x) - ln q(x)) termwise over explicit atoms,
    with a certified majorant bound on the family tails."""
    from .family import atom_weight_at, tilted_sum_rel, _family_series, ONE_POLY
    from .intervals import from_weight
    from .ksets import KSet
    from .series import FamilySeries, series_enclosure
    zp = tilted_sum_rel(measure, theta, rat(eps) / 16)
    zq = tilted_sum_rel(measure, phi, rat(eps) / 16)
    total = iv.mpf(0)
    for a in measure.atoms:
        p = from_weight(a.weight) * iv.exp(from_scalar(_sp(a.point, theta))) / zp
        q = from_weight(a.weight) * iv.exp(from_scalar(_sp(a.point, phi))) / zq
        total += p * (iv.log(p) - iv.log(q))
    lz = iv.log(zq) - iv.log(zp)
    lz_bound = max(abs(float(mpf(lz.a))), abs(float(mpf(lz.b)))) + 1
    for fam in measure.families:
        K = 32
        while True:
            # |ln(p_k/q_k)| <= |<theta-phi, x_k>| + |ln zq - ln zp|
            diff = tuple(t - o for t, o in zip(theta, phi))
            from .family import _poly_for_direction
            poly = _poly_for_direction(fam, _rationalize_param(diff))
            maj = tuple(abs(c) for c in poly)
            fs = _family_series(fam, theta, maj, KSet((), K))
            const_fs = _family_series(fam, theta, ONE_POLY, KSet((), K))
            tail1 = series_enclosure(fs, rat(eps) / 8)
            tail2 = series_enclosure(const_fs, rat(eps) / 8)
            if tail1 is None or tail2 is None:
                K *= 2
                continue
            bound = (tail1.b + lz_bound * tail2.b) / zp.a
            if bound <= float(eps) / 2 or K > 1 << 14:
                break
            K *= 2
        for k in range(1, K):
            x = fam.atom_point(k)
            w = from_weight(fam.atom_weight(k))
            p = w * iv.exp(from_scalar(_sp(x, theta))) / zp
            q = w * iv.exp(from_scalar(_sp(x, phi))) / zq
            total += p * (iv.log(p) - iv.log(q))
        total += iv.mpf([-bound, bound])
    return total


def _sp(x: Vec, theta: ParamVec):
    out = Fraction(0)
    for a, t in zip(x, theta):
        if a != 0:
            out = out + t * a
    return out


def _rationalize_param(p) -> Vec:
    return vec(param_as_rational(pvec(p)))


def suite_lemma5(measure: MixedMeasure, trials: int, seed: int,
                 eps: Fraction = Fraction(1, 10**9)) -> SuiteResult:
    """Partial-mean divergence formula against the direct series, plus the
    conditioning identity residual."""
    rng = random.Random(seed)
    ts = theta_space(measure)
    top = top_face(measure)
    checked = failures = 0
    id_checked = id_failures = 0
    faces_pool = None
    if not measure.has_curves:
        from .faces import enumerate_faces
        faces_pool = [f for f in enumerate_faces(measure) if f.key != top.key]
    tol = 4 * float(eps)
    for _ in range(trials):
        th = pvec(sample_param(measure, ts, rng, span=2))
        ph = pvec(sample_param(measure, ts, rng, span=2))
        dres = divergence(member(top, th), member(top, ph), eps)
        if dres[0] != "finite":
            continue
        oracle = direct_divergence_series(measure, th, ph, eps)
        checked += 1
        gap = abs(dres[1] - oracle)
        if float(mpf(gap.a)) > tol + float(mpf(dres[1].delta.b)) + float(mpf(oracle.delta.b)):
            failures += 1
        if faces_pool:
            f = faces_pool[rng.randrange(len(faces_pool))]
            p_mem = member(f, project_param(ph, f.flat.basis))
            q_mem = member(top, th)
            dfull = divergence(p_mem, q_mem, eps)
            dcond = divergence(p_mem, member(f, project_param(th, f.flat.basis)), eps)
            if dfull[0] == "finite" and dcond[0] == "finite":
                from .family import tilted_sum_rel
                num = tilted_sum_rel(f.measure, th, rat(eps) / 8)
                den = tilted_sum_rel(measure, th, rat(eps) / 8)
                resid = dfull[1] - dcond[1] + iv.log(num / den)
                id_checked += 1
                if abs(float(mpf(resid.mid))) > tol + float(mpf(resid.delta.b)):
                    id_failures += 1
    return SuiteResult("lemma5", trials, checked + id_checked,
                       failures + id_failures,
                       {"formula_checked": checked, "identity_checked": id_checked})


def suite_corollary1(measure: MixedMeasure, trials: int, seed: int) -> SuiteResult:
    """Interior Cauchy sequences must classify interior with coherent
    parameter, log-partition and variation gaps."""
    rng = random.Random(seed)
    ts = theta_space(measure)
    checked = failures = 0
    for _ in range(trials):
        z1 = pvec(sample_param(measure, ts, rng, span=2))
        z2 = pvec(sample_param(measure, ts, rng, span=2))
        if not (ts.ri_contains(z1) and ts.ri_contains(z2)):
            continue
        params = [tuple(a + Fraction(1, 4**n) * (b - a) for a, b in zip(z1, z2))
                  for n in range(1, 31)]
        rep = classify_sequence(measure, params)
        checked += 1
        ok = (rep.alternative == "interior"
              and rep.diagnostics.get("variation_gap_ub", 1.0) < 1e-3
              and rep.diagnostics.get("log_partition_gap", 1.0) < 1e-3)
        if not ok:
            failures += 1
    return SuiteResult("corollary1", trials, checked, failures)


def suite_theorem2(measure: MixedMeasure, xi: ParamSet, trials: int, seed: int,
                   detect_eps: Fraction = Fraction(1, 10**7),
                   witness_members: int = 20,
                   witness_target: Fraction = Fraction(1, 10**4)) -> SuiteResult:
    """Random sequences in Xi: every certified variation limit must lie in the
    computed closure; sampled closure members must be approachable by witness
    sequences."""
    rng = random.Random(seed)
    comps = variation_closure(measure, xi)
    by_key = {c.face.key: c for c in comps}
    checked = failures = 0
    detected = 0
    rec_gens = None
    if not xi.is_empty:
        rc = xi.recession_cone
        _, rays = generators(rc)
        rec_gens = [r for r in rays]
    for _ in range(trials):
        kind = rng.choice(["interior", "ray", "stall"]) if rec_gens else "interior"
        z1 = pvec(_sample_in_ri(xi, rng))
        if kind == "interior":
            z2 = pvec(_sample_in_ri(xi, rng))
            params = [tuple(a + Fraction(1, 4**n) * (b - a) for a, b in zip(z1, z2))
                      for n in range(1, 31)]
        else:
            tau = rec_gens[rng.randrange(len(rec_gens))]
            if rng.random() < 0.5 and len(rec_gens) > 1:
                tau2 = rec_gens[rng.randrange(len(rec_gens))]
                tau = tuple(a + b for a, b in zip(tau, tau2))
            if all(c == 0 for c in tau):
                continue
            step = Fraction(60)
            if kind == "ray":
                params = [tuple(a + step * n * t for a, t in zip(z1, tau))
                          for n in range(1, 31)]
            else:
                params = [tuple(a + step * min(n, 8) * t for a, t in zip(z1, tau))
                          for n in range(1, 31)]
        rep = classify_sequence(measure, params)
        checked += 1
        if rep.alternative == "interior":
            lim = member(top_face(measure), rep.limit_param)
            vd = member_variation_distance(member(top_face(measure), pvec(params[-1])), lim,
                                           detect_eps)
            if vd.b < 1e-6:
                detected += 1
                if not _member_in_closure(by_key, lim):
                    failures += 1
        elif rep.alternative == "boundary":
            lim = rep.limit_member
            vd = member_variation_distance(member(top_face(measure), pvec(params[-1])), lim,
                                           detect_eps)
            if vd.b < 1e-6:
                detected += 1
                if not _member_in_closure(by_key, lim):
                    failures += 1
    approached = 0
    sampled = 0
    for mem_ in _sample_closure_members(measure, xi, comps, witness_members, rng):
        sampled += 1
        stages = witness_sequence(measure, xi, mem_, count=60,
                                  stop_at=witness_target)
        if not any(s.distance_bound <= witness_target for s in stages):
            failures += 1
        else:
            approached += 1
    return SuiteResult("theorem2", trials, checked + sampled, failures,
                       {"detected_limits": detected, "members_sampled": sampled,
                        "members_approached": approached})


def _sample_in_ri(xi: ParamSet, rng: random.Random) -> Vec:
    base = vec(param_as_rational(xi.ri_point()))
    d = len(base)
    for _ in range(60):
        pert = tuple(Fraction(rng.randint(-20, 20), 16) for _ in range(d))
        cand = tuple(b + p for b, p in zip(base, pert))
        if xi.ri_contains(pvec(cand)):
            return vec(cand)
    return base


def _member_in_closure(by_key: dict, mem_: Member) -> bool:
    comp = by_key.get(mem_.face.key)
    if comp is None:
        return False
    if not comp.parameters.contains(mem_.theta):
        return False
    tf = theta_space(mem_.face.measure)
    return tf.contains(mem_.theta)


def _sample_closure_members(measure: MixedMeasure, xi: ParamSet,
                            comps, count: int, rng: random.Random):
    out = []
    if not comps:
        return out
    per = max(1, count // len(comps))
    for comp in comps:
        produced = 0
        params_poly = comp.parameters
        try:
            riq = ri_query(params_poly)
        except errors.EfcError:
            continue
        base = vec(param_as_rational(pvec(riq.point)))
        tf = theta_space(comp.face.measure)
        cands = [base]
        pts, _ = generators(params_poly)
        cands += [p for p in pts[:2]]
        for cand in cands:
            if produced >= per:
                break
            th = pvec(cand)
            if params_poly.contains(th) and tf.contains(th):
                try:
                    out.append(member(comp.face, th))
                    produced += 1
                except errors.EfcError:
                    continue
    return out[:count]
