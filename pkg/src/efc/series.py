"""Certified summation of tilted family series.

A tilted atom family contributes sums of the shape

    sum_{k in K} poly(k) * exp(c0 + r*k + q*k^2) * k^(-alpha)

with exact log-linear exponents.  Convergence is classified exactly from the
signs of q and r and from alpha; tails are enclosed by geometric-ratio bounds
(q < 0 or r < 0) or by a convexity sandwich between shifted integrals in the
critical case q = r = 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from mpmath import iv

from .intervals import from_fraction, from_scalar, ipow
from .ksets import KSet
from .scalars import Scalar, rat, sign_of


class Divergent(ArithmeticError):
    """The series has a divergent monomial; sign carries its direction."""

    def __init__(self, sign: int, message: str = "divergent series"):
        super().__init__(message)
        self.sign = sign


@dataclass(frozen=True)
class FamilySeries:
    c0: Scalar                       # ln of the constant factor
    r: Scalar                        # per-step log ratio
    q: Scalar                        # per-step-squared log ratio (0 for rays)
    alpha: Fraction
    poly: tuple[Fraction, Fraction, Fraction]
    kset: KSet

    def monomials(self) -> list[tuple[int, Fraction]]:
        return [(m, c) for m, c in enumerate(self.poly) if c != 0]


def monomial_converges(fs: FamilySeries, m: int) -> bool:
    ks = fs.kset.normalized()
    if ks.tail is None:
        return True
    sq, sr = sign_of(fs.q), sign_of(fs.r)
    if sq > 0 or (sq == 0 and sr > 0):
        return False
    if sq == 0 and sr == 0 and fs.alpha - m <= 1:
        return False
    return True


def series_converges(fs: FamilySeries) -> bool:
    return all(monomial_converges(fs, m) for m, _ in fs.monomials())


def divergence_sign(fs: FamilySeries) -> int:
    """Sign of the divergent part (dominant divergent monomial)."""
    bad = [(m, c) for m, c in fs.monomials() if not monomial_converges(fs, m)]
    if not bad:
        return 0
    m, c = max(bad)
    return 1 if c > 0 else -1


def _term(m: int, alpha: Fraction, c0i, ri, qi, k: int):
    e = c0i + ri * k + qi * (k * k)
    t = iv.exp(e)
    p = Fraction(m) - alpha
    if p != 0:
        t = t * ipow(iv.mpf(k), p)
    return t


def _power_factor(k: int, p: Fraction):
    if p == 0:
        return None
    if p.denominator == 1:
        e = int(p)
        return _fr(Fraction(1, k**-e)) if e < 0 else iv.mpf(k**e)
    return ipow(iv.mpf(k), p)


def _run_sum(m: int, alpha: Fraction, c0i, ri, qi, start: int, stop: int):
    """sum_{k=start}^{stop-1} k^m exp(c0 + r k + q k^2) k^-alpha with one
    exp at the start and incremental per-step ratios."""
    if stop <= start:
        return iv.mpf(0)
    p = Fraction(m) - alpha
    cur = iv.exp(c0i + ri * start + qi * (start * start))
    er = iv.exp(ri)
    eq2 = iv.exp(2 * qi)
    eqodd = iv.exp(qi * (2 * start + 1))
    total = iv.mpf(0)
    k = start
    while True:
        f = _power_factor(k, p)
        total += cur if f is None else cur * f
        k += 1
        if k >= stop:
            return total
        cur = cur * er * eqodd
        eqodd = eqodd * eq2


_MAXK = 1 << 22


# -- polylogarithm closed forms for integer weights ---------------------------
#
# sum_{k>=1} z^k k^(-beta) = Li_beta(z).  For 0 < z < 1 the near-critical
# regime (z -> 1) is reached through the reflection identities, whose
# auxiliary series converge geometrically in 1 - z; everything is enclosed
# in intervals, including zeta(3) via the alternating central-binomial
# series with exact rational partial sums.

_ZETA3_CACHE: dict[int, object] = {}


def _zeta3_iv():
    from mpmath import mp
    prec = iv.prec
    hit = _ZETA3_CACHE.get(prec)
    if hit is not None:
        return hit
    s = Fraction(0)
    k = 1
    binom = 2  # C(2k, k) at k = 1
    sign = 1
    while True:
        term = Fraction(5, 2) * Fraction(sign, k**3 * binom)
        s += term
        nxt = Fraction(5, 2) * Fraction(1, (k + 1) ** 3 * (binom * (2 * k + 1) * (2 * k + 2)
                                                           // ((k + 1) * (k + 1))))
        if nxt < Fraction(1, 2) ** (prec + 8):
            lo, hi = (s, s + nxt) if sign < 0 else (s - nxt, s)
            out = iv.mpf([_fr(lo).a, _fr(hi).b])
            break
        binom = binom * (2 * k + 1) * (2 * k + 2) // ((k + 1) * (k + 1))
        k += 1
        sign = -sign
    if len(_ZETA3_CACHE) < 64:
        _ZETA3_CACHE[prec] = out
    return out


def _fr(f: Fraction):
    return iv.mpf(f.numerator) / iv.mpf(f.denominator)


def _li_direct(beta: int, z, target):
    """Direct series for |z| <= 0.8; certified geometric remainder."""
    zu = abs(z).b
    if zu >= 0.8:
        return None
    total = iv.mpf(0)
    zk = iv.mpf(1)
    k = 0
    while True:
        k += 1
        zk = zk * z
        if beta > 0:
            total += zk * _fr(Fraction(1, k**beta))
        else:
            total += zk * (k ** (-beta))
        rem = (zu ** (k + 1)) / (1 - zu)
        if rem <= target or k > 8192:
            break
    return total + iv.mpf([-rem, rem])


_LI_CACHE: dict = {}


def _polylog_iv(beta: int, z, budget: float = 0.0):
    """Enclosure of Li_beta(z) for an interval 0 < z < 1 (z.b < 1 needed);
    absolute accuracy min(budget, resolution of the working precision)."""
    if z.a <= 0 or z.b >= 1:
        return None
    target = max(float(iv.mpf(2 ** -(iv.prec + 8)).b), 0.0)
    if budget > 0:
        target = max(target, budget / 8)
    if beta <= 0:
        w = z / (1 - z)
        if beta == 0:
            return w
        if beta == -1:
            return z / ((1 - z) * (1 - z))
        if beta == -2:
            return z * (1 + z) / ((1 - z) ** 3)
        return None
    key = (iv.prec, beta, z.a, z.b, target)
    hit = _LI_CACHE.get(key)
    if hit is not None:
        return hit
    out = _polylog_raw(beta, z, target)
    if out is not None and len(_LI_CACHE) < 16384:
        _LI_CACHE[key] = out
    return out


def _polylog_raw(beta: int, z, target):
    if beta == 1:
        return -iv.log(1 - z)
    direct = _li_direct(beta, z, target)
    if direct is not None:
        return direct
    w = 1 - z
    if beta == 2:
        liw = _li_direct(2, w, target)
        if liw is None:
            return None
        return iv.pi ** 2 / 6 - iv.log(z) * iv.log(w) - liw
    if beta == 3:
        liw = _li_direct(3, w, target)
        liv = _li_direct(3, -w / z, target)
        if liw is None or liv is None:
            return None
        lz = iv.log(z)
        return (_zeta3_iv() + lz**3 / 6 + iv.pi ** 2 * lz / 6
                - lz * lz * iv.log(w) / 2 - liw - liv)
    return None


def _tail_closed_form(fs: FamilySeries, m: int, start: int, budget: float = 0.0):
    """Closed-form tail sum for geometric/critical integer-weight series:
    sum_{k>=start} k^m exp(c0 + r k) k^-alpha.  None when not applicable."""
    beta_f = fs.alpha - m
    if beta_f.denominator != 1:
        return None
    beta = int(beta_f)
    if not (-2 <= beta <= 3):
        return None
    sr = sign_of(fs.r)
    c0i = from_scalar(fs.c0)
    if sr == 0:
        if beta < 2:
            raise Divergent(1)
        full = iv.pi ** 2 / 6 if beta == 2 else _zeta3_iv()
        head = iv.mpf(0)
        for k in range(1, start):
            head += _fr(Fraction(1, k**beta))
        return iv.exp(c0i) * (full - head)
    z = iv.exp(from_scalar(fs.r))
    li = _polylog_iv(beta, z, budget)
    if li is None:
        return None
    head = iv.mpf(0)
    zk = iv.mpf(1)
    for k in range(1, start):
        zk = zk * z
        if beta > 0:
            head += zk * _fr(Fraction(1, k**beta))
        else:
            head += zk * (k ** (-beta))
    return iv.exp(c0i) * (li - head)


def _tail_enclosure(fs: FamilySeries, m: int, start: int, budget: Fraction):
    """Enclosure of sum_{k >= start} k^m exp(...) k^-alpha, or None when the
    working precision cannot separate the needed exponent signs yet."""
    if not monomial_converges(fs, m):
        raise Divergent(1)
    sq, sr = sign_of(fs.q), sign_of(fs.r)
    if sq == 0:
        closed = _tail_closed_form(fs, m, start, float(budget))
        if closed is not None:
            return closed
    c0i, ri, qi = from_scalar(fs.c0), from_scalar(fs.r), from_scalar(fs.q)
    budget_f = from_fraction(budget)

    if sq == 0 and sr == 0:
        beta = fs.alpha - m
        expc = iv.exp(c0i)
        k = max(start, 2)
        while True:
            ki = iv.mpf(k)
            lo = ipow(ki, 1 - beta) / from_fraction(beta - 1) + ipow(ki, -beta) / 2
            hi = ipow(ki - from_fraction(Fraction(1, 2)), 1 - beta) / from_fraction(beta - 1)
            sandwich = iv.mpf([lo.a, hi.b]) * expc
            if sandwich.delta.b <= budget_f.a or k > _MAXK:
                return _run_sum(m, fs.alpha, c0i, ri, qi, start, k) + sandwich
            k *= 2

    if sq < 0:
        if qi.b >= 0:
            return None
        k = start
        while True:
            ratio_ub = 4 * iv.exp(ri + qi * (2 * k + 1)).b
            t_next = _term(m, fs.alpha, c0i, ri, qi, k + 1)
            if ratio_ub < 0.5 and 2 * t_next.b <= budget_f.a:
                break
            k = 2 * k + 1
            if k > _MAXK:
                return None
        return _run_sum(m, fs.alpha, c0i, ri, qi, start, k + 1) + iv.mpf([0, 2 * t_next.b])

    # sq == 0, sr < 0: geometric
    r_ub = iv.exp(ri).b
    if r_ub >= 1:
        return None
    rho = (1 + r_ub) / 2
    k = start
    while True:
        if r_ub * (1 + 1 / iv.mpf(k)).b ** 2 <= rho:
            t_next = _term(m, fs.alpha, c0i, ri, qi, k + 1)
            tail_ub = t_next.b / (1 - rho)
            if tail_ub <= budget_f.a:
                break
        k = 2 * k + 1
        if k > _MAXK:
            return None
    return _run_sum(m, fs.alpha, c0i, ri, qi, start, k + 1) + iv.mpf([0, tail_ub])


def series_enclosure(fs: FamilySeries, tail_budget: Fraction):
    """Interval containing the full series sum; None = retry at higher
    precision; raises Divergent for exactly-divergent monomials."""
    ks = fs.kset.normalized()
    mono = fs.monomials()
    if not mono:
        return iv.mpf(0)
    c0i, ri, qi = from_scalar(fs.c0), from_scalar(fs.r), from_scalar(fs.q)
    total = iv.mpf(0)
    per = rat(tail_budget) / len(mono)
    for m, coeff in mono:
        part = iv.mpf(0)
        for k in ks.iter_finite():
            part += _term(m, fs.alpha, c0i, ri, qi, k)
        if ks.tail is not None:
            try:
                tail = _tail_enclosure(fs, m, ks.tail, per)
            except Divergent:
                raise Divergent(1 if coeff > 0 else -1)
            if tail is None:
                return None
            part += tail
        total += from_fraction(coeff) * part
    return total
