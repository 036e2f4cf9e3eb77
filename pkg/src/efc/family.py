"""The exponential family over a mixed discrete measure: log-partition
domain with its lexicographic boundary structure, convex parameter sets,
certified evaluation of partition sums, moments, divergences and variation
distances.

Parameters are vectors of exact scalars: plain rationals, or rationals plus
logs of rationals (the tilt-ratio input sugar e^{theta_i} = r_i).  All
membership and sign decisions on parameters are exact; only values of the
partition function and integrals are intervals.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

from mpmath import iv, mpf

from . import errors
from .geometry import (AffineFlat, Eq, Ineq, Polyhedron, RelativeInterior,
                       Vec, dot, fm_project, nullspace, pdot, ri_query, vec,
                       zeros)
from .intervals import certify, from_fraction, from_scalar, from_weight, width
from .ksets import KSet
from .measures import (CurveFamily, Family, MixedMeasure, RayFamily,
                       atoms_in_region, measure_flat, region_kset)
from .scalars import LogLin, Scalar, rat, sign_of, weight_log
from .series import Divergent, FamilySeries, divergence_sign, series_converges, series_enclosure

ParamVec = tuple[Scalar, ...]


def pvec(xs) -> ParamVec:
    return tuple(x if isinstance(x, LogLin) else rat(x) for x in xs)


def param_is_rational(theta: ParamVec) -> bool:
    return all(isinstance(t, Fraction) or not t.logs for t in theta)


def param_as_rational(theta: ParamVec) -> Vec:
    out = []
    for t in theta:
        if isinstance(t, Fraction):
            out.append(t)
        elif not t.logs:
            out.append(t.rat)
        else:
            raise errors.InvalidInput("rational parameter required here")
    return tuple(out)


def solve_scalar_rhs(mat: Sequence[Sequence[Fraction]], rhs: list[Scalar]) -> Optional[list[Scalar]]:
    """Solve a rational system with exact-scalar right-hand sides."""
    m = len(mat)
    n = len(mat[0]) if m else 0
    a = [list(map(rat, row)) for row in mat]
    b = list(rhs)
    piv_cols: list[int] = []
    r = 0
    for c in range(n):
        p = next((i for i in range(r, m) if a[i][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        b[r], b[p] = b[p], b[r]
        inv = Fraction(1) / a[r][c]
        a[r] = [x * inv for x in a[r]]
        b[r] = b[r] * inv
        for i in range(m):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
                b[i] = b[i] - b[r] * f
        piv_cols.append(c)
        r += 1
    for i in range(r, m):
        if sign_of(b[i]) != 0:
            return None
    x: list[Scalar] = [Fraction(0)] * n
    for i, c in enumerate(piv_cols):
        x[c] = b[i]
    return x


def project_param(theta: ParamVec, basis: Sequence[Vec]) -> ParamVec:
    """Orthogonal projection onto span(basis), exact on scalar coordinates."""
    d = len(theta)
    if not basis:
        return tuple(Fraction(0) for _ in range(d))
    gram = [[dot(bi, bj) for bj in basis] for bi in basis]
    y = [pdot(bi, theta) for bi in basis]
    coef = solve_scalar_rhs(gram, y)
    assert coef is not None
    out: list[Scalar] = [Fraction(0)] * d
    for c, bvec in zip(coef, basis):
        for j in range(d):
            if bvec[j] != 0:
                out[j] = out[j] + c * bvec[j]
    return tuple(out)


def param_in_span(theta: ParamVec, basis: Sequence[Vec]) -> bool:
    proj = project_param(theta, basis)
    return all(sign_of(t - p) == 0 for t, p in zip(theta, proj))


# -- the domain of the log-partition function --------------------------------

@dataclass(frozen=True)
class DomainRule:
    """Lexicographic finiteness rule of one atom family."""

    kind: str                 # ray | curve
    primary: Vec              # step u (ray) or quad v (curve)
    secondary: Optional[Vec]  # lin u for curves
    ln_rho: Scalar
    closed: bool              # boundary admitted iff alpha > 1

    def admits(self, theta: ParamVec) -> bool:
        if self.kind == "ray":
            s = sign_of(pdot(self.primary, theta) + self.ln_rho)
            return s < 0 or (s == 0 and self.closed)
        sv = sign_of(pdot(self.primary, theta))
        if sv != 0:
            return sv < 0
        s = sign_of(pdot(self.secondary, theta) + self.ln_rho)
        return s < 0 or (s == 0 and self.closed)


@dataclass(frozen=True)
class DomainDescription:
    dim: int
    rules: tuple[DomainRule, ...]

    def contains(self, theta: ParamVec) -> bool:
        return all(r.admits(theta) for r in self.rules)

    def ray_rows(self) -> list[Ineq]:
        return [Ineq(r.primary, -r.ln_rho, strict=not r.closed)
                for r in self.rules if r.kind == "ray"]

    def curve_rules(self) -> list[DomainRule]:
        return [r for r in self.rules if r.kind == "curve"]

    def piece(self, boundary_mask: int) -> Polyhedron:
        """Semi-open piece with the masked curve rules on their boundary."""
        curves = self.curve_rules()
        ineqs = list(self.ray_rows())
        eqs = []
        for b, rule in enumerate(curves):
            if boundary_mask >> b & 1:
                eqs.append(Eq(rule.primary, Fraction(0)))
                ineqs.append(Ineq(rule.secondary, -rule.ln_rho, strict=not rule.closed))
            else:
                ineqs.append(Ineq(rule.primary, Fraction(0), strict=True))
        return Polyhedron(self.dim, tuple(ineqs), tuple(eqs))

    def pieces(self) -> list[tuple[int, Polyhedron]]:
        n = len(self.curve_rules())
        return [(mask, self.piece(mask)) for mask in range(1 << n)]


@functools.lru_cache(maxsize=256)
def domain(measure: MixedMeasure) -> DomainDescription:
    rules = []
    for rf in measure.rays:
        rules.append(DomainRule("ray", rf.step, None, LogLin.ln(rf.rho),
                                closed=rf.alpha > 1))
    for cf in measure.curves:
        rules.append(DomainRule("curve", cf.quad, cf.lin, LogLin.ln(cf.rho),
                                closed=cf.alpha > 1))
    return DomainDescription(measure.dimension, tuple(rules))


def domain_contains(measure: MixedMeasure, theta: ParamVec) -> bool:
    return domain(measure).contains(theta)


def direction_enters_domain(measure: MixedMeasure, theta: ParamVec, tau: Vec) -> bool:
    """Does theta + t*tau stay in dom for all small t > 0?  Lexicographic."""
    if not domain_contains(measure, theta):
        return False
    tau = vec(tau)
    for r in domain(measure).rules:
        if r.kind == "ray":
            if sign_of(pdot(r.primary, theta) + r.ln_rho) == 0:
                d = dot(r.primary, tau)
                if d > 0 or (d == 0 and not r.closed):
                    return False
        else:
            sv = sign_of(pdot(r.primary, theta))
            if sv < 0:
                continue
            dv = dot(r.primary, tau)
            if dv > 0:
                return False
            if dv == 0:
                if sign_of(pdot(r.secondary, theta) + r.ln_rho) == 0:
                    d = dot(r.secondary, tau)
                    if d > 0 or (d == 0 and not r.closed):
                        return False
    return True


# -- convex parameter sets ----------------------------------------------------

def _lin_subspace_poly(measure: MixedMeasure) -> Polyhedron:
    flat = measure_flat(measure)
    return Polyhedron.from_flat(AffineFlat(zeros(measure.dimension), flat.basis))


def lin_flat(measure: MixedMeasure) -> AffineFlat:
    return AffineFlat(zeros(measure.dimension), measure_flat(measure).basis)


@dataclass(frozen=True)
class ParamSet:
    """A convex parameter set: effective = proj_lin(user) ∩ Θ, reduced to the
    minimal-degeneracy lexicographic piece (a single semi-open polyhedron).
    The full effective set is the union of `pieces`; closure, relative
    interior and recession cone all live on the minimal piece."""

    measure: MixedMeasure
    user: Polyhedron
    main: Optional[Polyhedron]    # semi-open; None iff the effective set is empty
    user_proj: Polyhedron         # user projected onto lin(mu)
    pieces: tuple[Polyhedron, ...] = ()

    @staticmethod
    def build(measure: MixedMeasure, user: Optional[Polyhedron] = None) -> "ParamSet":
        d = measure.dimension
        if user is None:
            user = Polyhedron.whole_space(d)
        user_proj = fm_project(user, lin_flat(measure))
        lin_poly = _lin_subspace_poly(measure)
        dom = domain(measure)
        feasible = []
        kept = []
        for mask, piece in dom.pieces():
            cand = user_proj.intersect(lin_poly).intersect(piece)
            if cand.some_point() is not None:
                feasible.append(mask)
                kept.append(cand)
        if not feasible:
            return ParamSet(measure, user, None, user_proj)
        minimal = feasible[0]
        for mask in feasible[1:]:
            minimal &= mask
        main = user_proj.intersect(lin_poly).intersect(dom.piece(minimal))
        assert main.some_point() is not None  # convexity of the effective set
        return ParamSet(measure, user, main, user_proj, tuple(kept))

    @property
    def is_empty(self) -> bool:
        return self.main is None

    def contains(self, theta: ParamVec) -> bool:
        if self.is_empty:
            return False
        return (self.user_proj.contains(theta)
                and _lin_subspace_poly(self.measure).contains(theta)
                and domain_contains(self.measure, theta))

    @functools.cached_property
    def closure(self) -> Polyhedron:
        if self.is_empty:
            return Polyhedron.empty(self.measure.dimension)
        return self.main.closed().canonical_full()

    @functools.cached_property
    def relative_interior(self) -> RelativeInterior:
        if self.is_empty:
            raise errors.RelativeBoundaryDegenerate(
                "empty parameter set has no relative interior")
        return ri_query(self.closure)

    def ri_contains(self, theta: ParamVec) -> bool:
        return not self.is_empty and self.relative_interior.contains(theta)

    def ri_point(self) -> ParamVec:
        return self.relative_interior.point

    def ri_rows(self) -> Polyhedron:
        """ri as a semi-open polyhedron (facets strict)."""
        c = self.relative_interior.poly
        return Polyhedron(c.dim, tuple(Ineq(i.normal, i.offset, True) for i in c.ineqs), c.eqs)

    @functools.cached_property
    def recession_cone(self) -> Polyhedron:
        if self.is_empty:
            raise errors.RelativeBoundaryDegenerate(
                "empty parameter set has no recession cone")
        return self.closure.recession_cone()

    def closure_projected(self, flat: AffineFlat) -> Polyhedron:
        """cl(pi_F(set)) = pi_F(cl(set)), exact."""
        return fm_project(self.closure, flat)

    def ri_projected(self, flat: AffineFlat) -> Polyhedron:
        """pi_F(ri(set)) = ri(pi_F(set)) as a semi-open polyhedron."""
        return fm_project(self.ri_rows(), flat)

    def recession_projected(self, flat: AffineFlat) -> Polyhedron:
        """rec(pi_F(ri set)) = pi_F(rec(cl set)) for polyhedra."""
        return fm_project(self.recession_cone, flat)

    def with_extra_equalities(self, eqs: Sequence[Eq]) -> "ParamSet":
        return ParamSet.build(self.measure, self.user.intersect(
            Polyhedron(self.measure.dimension, (), tuple(eqs))))

    def restrict_to_affine(self, theta: ParamVec, subspace_normals: Sequence[Vec]) -> "ParamSet":
        """Intersect with theta + {x : <w, x> = 0 for all given normals w}."""
        eqs = [Eq(w, pdot(w, theta)) for w in subspace_normals]
        return self.with_extra_equalities(eqs)


def theta_space(measure: MixedMeasure) -> ParamSet:
    return ParamSet.build(measure, None)


# -- tilted sums ---------------------------------------------------------------

def _family_series(fam: Family, theta: ParamVec,
                   poly: tuple[Fraction, Fraction, Fraction],
                   kset: KSet) -> FamilySeries:
    c0 = weight_log(fam.scale) + pdot(fam.base, theta)
    if isinstance(fam, RayFamily):
        r = pdot(fam.step, theta) + LogLin.ln(fam.rho)
        q: Scalar = Fraction(0)
    else:
        r = pdot(fam.lin, theta) + LogLin.ln(fam.rho)
        q = pdot(fam.quad, theta)
    return FamilySeries(c0, r, q, fam.alpha, poly, kset)


def _poly_for_direction(fam: Family, tau: Vec) -> tuple[Fraction, Fraction, Fraction]:
    if isinstance(fam, RayFamily):
        return (dot(fam.base, tau), dot(fam.step, tau), Fraction(0))
    return (dot(fam.base, tau), dot(fam.lin, tau), dot(fam.quad, tau))


ONE_POLY = (Fraction(1), Fraction(0), Fraction(0))


def tilted_sum(measure: MixedMeasure, theta: ParamVec, eps: Fraction,
               region="all", direction: Optional[Vec] = None):
    """Certified interval of sum_x w(x) f(x) e^{<theta,x>} over atoms in the
    region, f = 1 or <direction, .>.  Raises Divergent on divergent parts."""
    atoms = atoms_in_region(measure, region)
    exact_parts = []
    for a in atoms:
        factor = Fraction(1) if direction is None else dot(a.point, vec(direction))
        if factor != 0:
            exact_parts.append((a.weight, factor, pdot(a.point, theta)))
    fams = []
    for fam in measure.families:
        ks = region_kset(measure, fam, region)
        if ks.is_empty:
            continue
        poly = ONE_POLY if direction is None else _poly_for_direction(fam, vec(direction))
        fs = _family_series(fam, theta, poly, ks)
        if not series_converges(fs):
            raise Divergent(divergence_sign(fs))
        fams.append(fs)

    def evaluate(bits: int):
        total = iv.mpf(0)
        for w, factor, e in exact_parts:
            total += from_weight(w) * from_fraction(factor) * iv.exp(from_scalar(e))
        for fs in fams:
            enc = series_enclosure(fs, rat(eps) / max(1, 4 * len(fams)))
            if enc is None:
                return None
            total += enc
        return total

    return certify(evaluate, eps)


def _frac_from_mpf(x) -> Fraction:
    m = mpf(x)
    if m <= 0:
        return Fraction(0)
    sign, man, exp, _ = m._mpf_
    f = Fraction(man) * Fraction(2) ** exp
    return -f if sign else f


def tilted_sum_rel(measure: MixedMeasure, theta: ParamVec, releps: Fraction,
                   region="all"):
    """Positive tilted sum certified to the given relative width."""
    eps_abs = Fraction(1)
    for _ in range(80):
        val = tilted_sum(measure, theta, eps_abs, region=region)
        if val.a > 0 and _frac_from_mpf(mpf(val.delta.b)) <= rat(releps) * _frac_from_mpf(val.a):
            return val
        ub = _frac_from_mpf(val.b)
        nxt = eps_abs / 16
        if ub > 0:
            nxt = min(nxt, rat(releps) * ub / 4)
        eps_abs = nxt
    raise errors.PrecisionUnreachableError("relative certification stalled")


def partition_interval(measure: MixedMeasure, theta: ParamVec, eps: Fraction):
    if not domain_contains(measure, theta):
        raise errors.DomainViolation(f"parameter outside dom: {theta}")
    return tilted_sum(measure, theta, eps)


def log_partition(measure: MixedMeasure, theta: ParamVec, eps: Fraction):
    if not domain_contains(measure, theta):
        raise errors.DomainViolation(f"parameter outside dom: {theta}")
    z = tilted_sum_rel(measure, theta, rat(eps) / 2)

    def evaluate(bits: int):
        return iv.log(z)

    return certify(evaluate, eps)


def _clamp(x, lo: float, hi: float):
    a = max(x.a, iv.mpf(lo).a)
    b = min(x.b, iv.mpf(hi).b)
    return iv.mpf([a, b])


def region_probability(measure: MixedMeasure, theta: ParamVec, region, eps: Fraction):
    """Q_theta(region) as a certified interval in [0, 1]."""
    den = tilted_sum_rel(measure, theta, rat(eps) / 8)
    num_eps = rat(eps) * _frac_from_mpf(den.a) / 8

    def evaluate(bits: int):
        num = tilted_sum(measure, theta, num_eps, region=region)
        return _clamp(num / den, 0.0, 1.0)

    return certify(evaluate, eps)


def atom_weight_at(measure: MixedMeasure, x: Vec):
    """Weight of the atom at x, or None."""
    for a in measure.atoms:
        if a.point == x:
            return a.weight
    region = Polyhedron.from_flat(AffineFlat(vec(x), ()))
    for fam in measure.families:
        ks = measure.family_kset(fam, region)
        for k in ks.iter_finite():
            return fam.atom_weight(k)
        assert ks.tail is None
    return None


def pmf(measure: MixedMeasure, theta: ParamVec, x: Vec, eps: Fraction):
    """Q_theta({x}); exact zero when x is not an atom."""
    if not domain_contains(measure, theta):
        raise errors.DomainViolation(f"parameter outside dom: {theta}")
    w = atom_weight_at(measure, vec(x))
    if w is None:
        return iv.mpf(0)
    den = tilted_sum_rel(measure, theta, rat(eps) / 8)

    def evaluate(bits: int):
        num = from_weight(w) * iv.exp(from_scalar(pdot(vec(x), theta)))
        return _clamp(num / den, 0.0, 1.0)

    return certify(evaluate, eps)


# -- moments and integrability -------------------------------------------------

def moment(measure: MixedMeasure, theta: ParamVec, tau: Vec, eps: Fraction):
    """Integral of <tau, x> under Q_theta: ('finite', interval) or ('-inf', None)."""
    tau = vec(tau)
    from .intervals import bits_for, prec_bits
    rel = Fraction(1, 64)
    for _ in range(60):
        den = tilted_sum_rel(measure, theta, rel)
        num_eps = rel * max(_frac_from_mpf(den.a), Fraction(1, 4))
        try:
            num = tilted_sum(measure, theta, num_eps, direction=tau)
        except Divergent as dv:
            if dv.sign > 0:
                raise AssertionError("positive part diverged inside dom") from dv
            return ("-inf", None)
        with prec_bits(bits_for(rel * rat(eps))):
            out = num / den
        if width(out) <= float(eps):
            return ("finite", out)
        rel /= 16
    raise errors.PrecisionUnreachableError("moment certification stalled")


def directional_derivative(measure: MixedMeasure, theta: ParamVec, tau: Vec, eps: Fraction):
    if not direction_enters_domain(measure, theta, vec(tau)):
        raise errors.DirectionLeavesDomain(f"{tau} leaves dom at {theta}")
    return moment(measure, theta, tau, eps)


@dataclass(frozen=True)
class IntegrabilityProfile:
    constraints: tuple[Vec, ...]   # every integrable direction is orthogonal to these
    basis: tuple[Vec, ...]         # basis of the integrable subspace
    mean: tuple                    # interval coordinates of the partial mean

    @property
    def full(self) -> bool:
        return not self.constraints

    def contains(self, tau: Sequence[Scalar]) -> bool:
        return all(sign_of(pdot(w, tuple(tau))) == 0 for w in self.constraints)


def integrable_directions(measure: MixedMeasure, theta: ParamVec) -> tuple[list[Vec], list[Vec]]:
    """(constraint normals, basis) of the subspace of integrable directions."""
    cons: list[Vec] = []
    for fam in measure.families:
        if isinstance(fam, RayFamily):
            crit = sign_of(pdot(fam.step, theta) + LogLin.ln(fam.rho)) == 0
            if crit and fam.alpha <= 2:
                cons.append(fam.step)
        else:
            if sign_of(pdot(fam.quad, theta)) != 0:
                continue
            if sign_of(pdot(fam.lin, theta) + LogLin.ln(fam.rho)) != 0:
                continue
            # fully critical: weights ~ k^-alpha and the k^m moment diverges
            # iff alpha <= m + 1
            if fam.alpha <= 3:
                cons.append(fam.quad)
            if fam.alpha <= 2:
                cons.append(fam.lin)
    basis = nullspace(cons, measure.dimension)
    return cons, basis


def integrability(measure: MixedMeasure, theta: ParamVec, eps: Fraction) -> IntegrabilityProfile:
    cons, basis = integrable_directions(measure, theta)
    d = measure.dimension
    if not basis:
        return IntegrabilityProfile(tuple(cons), (), tuple(iv.mpf(0) for _ in range(d)))
    ys = []
    for b in basis:
        kind, val = moment(measure, theta, b, eps)
        assert kind == "finite"
        ys.append(val)
    gram = [[dot(bi, bj) for bj in basis] for bi in basis]
    ginv = _invert_rational(gram)
    coef = []
    for i in range(len(basis)):
        acc = iv.mpf(0)
        for j in range(len(basis)):
            if ginv[i][j] != 0:
                acc += from_fraction(ginv[i][j]) * ys[j]
        coef.append(acc)
    mean = []
    for j in range(d):
        acc = iv.mpf(0)
        for i, b in enumerate(basis):
            if b[j] != 0:
                acc += coef[i] * from_fraction(b[j])
        mean.append(acc)
    return IntegrabilityProfile(tuple(cons), tuple(basis), tuple(mean))


def _invert_rational(mat: Sequence[Sequence[Fraction]]) -> list[list[Fraction]]:
    n = len(mat)
    a = [list(map(rat, row)) + [Fraction(1 if i == j else 0) for j in range(n)]
         for i, row in enumerate(mat)]
    for c in range(n):
        p = next(i for i in range(c, n) if a[i][c] != 0)
        a[c], a[p] = a[p], a[c]
        inv = Fraction(1) / a[c][c]
        a[c] = [x * inv for x in a[c]]
        for i in range(n):
            if i != c and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[c])]
    return [row[n:] for row in a]


# -- divergence within one component --------------------------------------------

def divergence_same_measure(measure: MixedMeasure, theta: ParamVec, other: ParamVec,
                            eps: Fraction):
    """D(Q_theta || Q_other), both tilts of this measure: ('finite', interval)
    or ('+inf', None)."""
    if not domain_contains(measure, theta):
        raise errors.DomainViolation("first parameter outside dom")
    if not domain_contains(measure, other):
        raise errors.DomainViolation("second parameter outside dom")
    cons, _ = integrable_directions(measure, theta)
    diff = tuple(t - o for t, o in zip(theta, other))
    if any(sign_of(pdot(w, diff)) != 0 for w in cons):
        return ("+inf", None)
    scale = 1
    for dj in diff:
        if sign_of(dj) != 0:
            scale += abs(float(mpf(from_scalar(dj).b)))
    prof = integrability(measure, theta, rat(eps) / Fraction(8 * (1 + int(scale))))
    la = log_partition(measure, theta, rat(eps) / 8)
    lb = log_partition(measure, other, rat(eps) / 8)

    def evaluate(bits: int):
        acc = iv.mpf(0)
        for j in range(measure.dimension):
            if sign_of(diff[j]) != 0:
                acc += from_scalar(diff[j]) * prof.mean[j]
        return acc - la + lb

    return ("finite", certify(evaluate, eps))


# -- variation distance ----------------------------------------------------------

def family_identity(fam: Family):
    if isinstance(fam, RayFamily):
        return ("ray", fam.base, fam.step, fam.rho, fam.alpha, fam.scale)
    return ("curve", fam.base, fam.lin, fam.quad, fam.rho, fam.alpha, fam.scale)


def variation_distance(mp: MixedMeasure, theta: ParamVec,
                       mq: MixedMeasure, phi: ParamVec, eps: Fraction):
    """Total variation sum |p - q| over the union of atoms; range [0, 2]."""
    if mp.dimension != mq.dimension:
        raise errors.InvalidInput("dimension mismatch")
    if not domain_contains(mp, theta) or not domain_contains(mq, phi):
        raise errors.DomainViolation("parameter outside dom")
    inner = rat(eps) / 16
    zp = tilted_sum_rel(mp, theta, inner)
    zq = tilted_sum_rel(mq, phi, inner)
    finite_pts = sorted({a.point for a in mp.atoms} | {a.point for a in mq.atoms})
    fams: dict = {}
    for fam in mp.families:
        fams.setdefault(family_identity(fam), [None, None])[0] = fam
    for fam in mq.families:
        fams.setdefault(family_identity(fam), [None, None])[1] = fam

    def evaluate(bits: int):
        total = iv.mpf(0)
        for x in finite_pts:
            wp = atom_weight_at(mp, x)
            wq = atom_weight_at(mq, x)
            p = from_weight(wp) * iv.exp(from_scalar(pdot(x, theta))) / zp if wp is not None else iv.mpf(0)
            q = from_weight(wq) * iv.exp(from_scalar(pdot(x, phi))) / zq if wq is not None else iv.mpf(0)
            total += abs(p - q)
        finite_set = set(finite_pts)
        for _, (fp, fq) in sorted(fams.items()):
            fam = fp or fq
            K = 8
            while True:
                tp = _family_tail_ub(fp, theta, K, inner) / zp if fp else iv.mpf(0)
                tq = _family_tail_ub(fq, phi, K, inner) / zq if fq else iv.mpf(0)
                bound = tp.b + tq.b
                if bound <= float(inner) * 2 or K > 1 << 16:
                    break
                K *= 2
            pgen = _pmf_term_stream(fp, theta, zp) if fp else None
            qgen = _pmf_term_stream(fq, phi, zq) if fq else None
            for k in range(1, K):
                p = next(pgen) if pgen else iv.mpf(0)
                q = next(qgen) if qgen else iv.mpf(0)
                if fam.atom_point(k) in finite_set:
                    continue  # collisions rejected at validation
                total += abs(p - q)
            total += iv.mpf([0, bound])
        return _clamp(total, 0.0, 2.0)

    return certify(evaluate, eps)


def _pmf_term_stream(fam: Family, theta: ParamVec, z):
    """Yields w_k e^{<theta, x_k>} / z for k = 1, 2, ... incrementally."""
    fs = _family_series(fam, theta, ONE_POLY, KSet.all())
    c0i, ri, qi = from_scalar(fs.c0), from_scalar(fs.r), from_scalar(fs.q)
    cur = iv.exp(c0i + ri + qi)
    er = iv.exp(ri)
    eq2 = iv.exp(2 * qi)
    eqodd = iv.exp(qi * 3)
    alpha = fs.alpha
    int_alpha = alpha.denominator == 1
    k = 1
    while True:
        if alpha == 0:
            yield cur / z
        elif int_alpha:
            yield cur / z / (k ** int(alpha))
        else:
            yield cur * ipow(iv.mpf(k), -alpha) / z
        k += 1
        cur = cur * er * eqodd
        eqodd = eqodd * eq2


def _family_tail_ub(fam: Family, theta: ParamVec, start: int, budget: Fraction):
    fs = _family_series(fam, theta, ONE_POLY, KSet((), start))
    enc = series_enclosure(fs, budget)
    if enc is None:
        return iv.mpf([0, float("inf")])
    return enc
