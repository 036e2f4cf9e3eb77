"""Certified interval arithmetic on top of mpmath's interval context.

All transcendental quantities (exp/log of rationals, power tails) are
evaluated as enclosing intervals.  Callers request a target width and the
helpers raise the working precision until the enclosure is tight enough;
``PrecisionUnreachable`` is the only way a numeric query can fail.
"""

from __future__ import annotations

import contextlib
from fractions import Fraction
from typing import Callable, Iterable, Optional

from mpmath import iv, mpf

from .scalars import LogLin, PowerProduct, Scalar, Weight, rat

DEFAULT_EPS = Fraction(1, 10**9)

# generous default so casual interval combinations outside an explicit
# precision context do not collapse enclosures to double precision
iv.prec = max(iv.prec, 160)


def bits_for(eps: Fraction, slack: int = 96) -> int:
    e = rat(eps)
    return slack + max(0, e.denominator.bit_length() - e.numerator.bit_length())


class PrecisionUnreachable(ArithmeticError):
    """Requested enclosure width could not be certified within the caps."""


@contextlib.contextmanager
def prec_bits(bits: int):
    old = iv.prec
    iv.prec = bits
    try:
        yield
    finally:
        iv.prec = old


def from_fraction(f: Fraction):
    f = rat(f)
    return iv.mpf(f.numerator) / iv.mpf(f.denominator)


def from_scalar(x: Scalar):
    if isinstance(x, LogLin):
        out = from_fraction(x.rat)
        for p, c in x.logs.items():
            out += from_fraction(c) * iv.log(iv.mpf(p))
        return out
    return from_fraction(rat(x))


def from_weight(w: Weight):
    if isinstance(w, PowerProduct):
        out = from_fraction(w.coeff)
        for p, e in w.exps.items():
            out *= iv.exp(from_fraction(e) * iv.log(iv.mpf(p)))
        return out
    return from_fraction(rat(w))


def ipow(base, exponent: Fraction):
    """base**exponent for an interval base > 0 and rational exponent."""
    e = rat(exponent)
    if e == 0:
        return iv.mpf(1)
    if e.denominator == 1:
        return base ** int(e)
    return iv.exp(from_fraction(e) * iv.log(base))


def width(x) -> float:
    return float(mpf(x.delta.b))


def lower(x) -> mpf:
    return x.a


def upper(x) -> mpf:
    return x.b


def midpoint_float(x) -> float:
    return float(x.mid)


def contains_fraction(x, f: Fraction) -> bool:
    g = from_fraction(f)
    return bool(x.a <= g.b and g.a <= x.b)


def certainly_le(x, y) -> bool:
    return bool(x.b <= y.a)


def certainly_lt(x, y) -> bool:
    return bool(x.b < y.a)


def overlap(x, y) -> bool:
    return bool(x.a <= y.b and y.a <= x.b)


def hull(xs: Iterable):
    xs = list(xs)
    out = xs[0]
    for x in xs[1:]:
        out = iv.mpf([min(out.a, x.a), max(out.b, x.b)])
    return out


def to_decimal_pair(x, digits: int = 17) -> tuple[str, str]:
    """Outward decimal endpoints, for reports."""
    from mpmath import mp, nstr

    with prec_bits(max(iv.prec, 80)):
        lo = nstr(mpf(x.a), digits, strip_zeros=False)
        hi = nstr(mpf(x.b), digits, strip_zeros=False)
    return lo, hi


def certify(fn: Callable[[int], "iv.mpf"], eps: Fraction,
            start_bits: int = 96, max_bits: int = 1 << 18):
    """Re-run fn at growing precision until the enclosure width <= eps.

    The precision step adapts to the observed gap, so values of huge
    magnitude converge in a couple of rounds."""
    import math

    from mpmath import mp

    eps_f = float(eps)
    bits = start_bits
    last = None
    while bits <= max_bits:
        with prec_bits(bits):
            x = fn(bits)
            if x is not None:
                w = mpf(x.delta.b)
                if w <= eps_f:
                    return x
                last = x
                try:
                    with mp.workprec(53):
                        gap = int(mp.log(w / mpf(eps_f), 2)) + 8
                except (ValueError, ZeroDivisionError, OverflowError):
                    gap = bits
                bits += max(bits, min(gap, max_bits))
                continue
        bits *= 2
    raise PrecisionUnreachable(
        f"could not certify width <= {eps} (best {None if last is None else width(last)})"
    )
