"""Exact scalar types shared by the whole engine.

Besides plain rationals two closed families of exact values occur:

* log-linear forms ``q + sum c_p * ln(p)`` over primes p (inner products of
  tilted parameters, halfspace offsets of log-partition domains), and
* positive power products ``q * prod p**e_p`` (atom weights of restricted
  measures, where ``k**-alpha`` need not be rational).

Signs and comparisons of both are decidable: a vanishing log part reduces to
an integer comparison through unique factorization, and a mixed value
``q + ln(r)`` with rational q != 0 and algebraic r is never zero, so interval
refinement always separates it from zero.  Nothing in the exact layer falls
back to floating point.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from typing import Union

Rat = Fraction

_RAT_RE = None  # compiled lazily


def rat(x) -> Fraction:
    """Coerce ints/Fractions to Fraction; floats are rejected."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"expected exact rational, got {type(x).__name__}")


def parse_rat(text: str) -> Fraction:
    """Parse the strict 'p/q' grammar.  Decimal points are rejected."""
    global _RAT_RE
    if _RAT_RE is None:
        import re

        _RAT_RE = re.compile(r"^-?\d+(/[1-9]\d*)?$")
    if not isinstance(text, str) or not _RAT_RE.match(text.strip()):
        raise ValueError(f"rationals only: bad literal {text!r}")
    return Fraction(text.strip())


def format_rat(x: Fraction) -> str:
    return str(Fraction(x))


@lru_cache(maxsize=4096)
def factorint(n: int) -> tuple[tuple[int, int], ...]:
    """Prime factorization by trial division; inputs are user-scale."""
    if n <= 0:
        raise ValueError("positive integers only")
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            e = 0
            while n % d == 0:
                n //= d
                e += 1
            out.append((d, e))
        d += 1 if d == 2 else 2
    if n > 1:
        out.append((n, 1))
    return tuple(out)


def _prime_exponents(r: Fraction) -> dict[int, Fraction]:
    if r <= 0:
        raise ValueError("positive rationals only")
    exps: dict[int, Fraction] = {}
    for p, e in factorint(r.numerator):
        exps[p] = exps.get(p, Fraction(0)) + e
    for p, e in factorint(r.denominator):
        exps[p] = exps.get(p, Fraction(0)) - e
    return {p: e for p, e in exps.items() if e}


Scalar = Union[Fraction, "LogLin"]


class LogLin:
    """Exact value ``rat + sum coeff_p * ln(p)`` over prime bases p."""

    __slots__ = ("rat", "logs")

    def __init__(self, rational: Fraction, logs: dict[int, Fraction]):
        self.rat = Fraction(rational)
        self.logs = {p: Fraction(c) for p, c in logs.items() if c}

    # -- constructors -------------------------------------------------
    @staticmethod
    def of(x) -> Scalar:
        if isinstance(x, LogLin):
            return x
        return rat(x)

    @staticmethod
    def ln(r: Fraction) -> Scalar:
        """Exact ln of a positive rational, as a log-linear form."""
        exps = _prime_exponents(Fraction(r))
        if not exps:
            return Fraction(0)
        return LogLin(Fraction(0), exps)

    @staticmethod
    def make(rational, logs) -> Scalar:
        v = LogLin(rat(rational), logs)
        if not v.logs:
            return v.rat
        return v

    # -- arithmetic ----------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, LogLin):
            return other
        if isinstance(other, (int, Fraction)):
            return LogLin(rat(other), {})
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        logs = dict(self.logs)
        for p, c in o.logs.items():
            logs[p] = logs.get(p, Fraction(0)) + c
        return LogLin.make(self.rat + o.rat, logs)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self.__add__(-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o.__add__(-self)

    def __neg__(self):
        return LogLin(-self.rat, {p: -c for p, c in self.logs.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            f = rat(other)
            if f == 0:
                return Fraction(0)
            return LogLin.make(self.rat * f, {p: c * f for p, c in self.logs.items()})
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)) and other != 0:
            return self.__mul__(Fraction(1, 1) / rat(other))
        return NotImplemented

    def __bool__(self):
        return self.sign() != 0

    # -- exact order ---------------------------------------------------
    def sign(self) -> int:
        if not self.logs:
            return -1 if self.rat < 0 else (1 if self.rat > 0 else 0)
        if self.rat == 0:
            return _log_part_sign(self.logs)
        # rat != 0 and a nonzero log part: the value cannot be zero, so
        # interval refinement terminates.
        from mpmath import iv

        bits = 64
        while True:
            old = iv.prec
            try:
                iv.prec = bits
                x = iv.mpf(self.rat.numerator) / iv.mpf(self.rat.denominator)
                for p, c in self.logs.items():
                    x += (iv.mpf(c.numerator) / iv.mpf(c.denominator)) * iv.log(iv.mpf(p))
                if x.a > 0:
                    return 1
                if x.b < 0:
                    return -1
            finally:
                iv.prec = old
            bits *= 2
            if bits > 1 << 20:  # pragma: no cover - unreachable for exact inputs
                raise ArithmeticError("sign refinement failed to converge")

    def _cmp(self, other) -> int:
        o = self._coerce(other)
        if o is None:
            raise TypeError(f"cannot compare LogLin with {type(other).__name__}")
        return (self - o).sign()

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __eq__(self, other):
        if isinstance(other, (int, Fraction, LogLin)):
            return self._cmp(other) == 0
        return NotImplemented

    def __hash__(self):
        if not self.logs:
            return hash(self.rat)
        return hash((self.rat, tuple(sorted(self.logs.items()))))

    def __repr__(self):
        if not self.logs:
            return f"LogLin({self.rat})"
        parts = " + ".join(f"{c}*ln({p})" for p, c in sorted(self.logs.items()))
        return f"LogLin({self.rat} + {parts})"


def _log_part_sign(logs: dict[int, Fraction]) -> int:
    """Sign of sum c_p ln p: compare prod p**(N c_p) against 1 exactly."""
    denoms = [c.denominator for c in logs.values()]
    n = 1
    for d in denoms:
        n = n * d // _gcd(n, d)
    num = 1
    den = 1
    for p, c in logs.items():
        e = int(c * n)
        if e > 0:
            num *= p**e
        elif e < 0:
            den *= p ** (-e)
    if num > den:
        return 1
    if num < den:
        return -1
    return 0


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a


def sign_of(x: Scalar) -> int:
    if isinstance(x, LogLin):
        return x.sign()
    f = rat(x)
    return -1 if f < 0 else (1 if f > 0 else 0)


def scalar_eq(a: Scalar, b: Scalar) -> bool:
    return sign_of(subtract(a, b)) == 0


def subtract(a: Scalar, b: Scalar):
    return a - b


def as_loglin(x: Scalar) -> LogLin:
    if isinstance(x, LogLin):
        return x
    return LogLin(rat(x), {})


class PowerProduct:
    """Exact positive scalar ``coeff * prod p**e_p`` with rational parts."""

    __slots__ = ("coeff", "exps")

    def __init__(self, coeff: Fraction, exps: dict[int, Fraction]):
        c = Fraction(coeff)
        if c <= 0:
            raise ValueError("power products are positive")
        exps = {p: Fraction(e) for p, e in exps.items() if e}
        # absorb integer exponents into the coefficient
        for p in list(exps):
            e = exps[p]
            if e.denominator == 1:
                c *= Fraction(p) ** int(e)
                del exps[p]
        self.coeff = c
        self.exps = exps

    @staticmethod
    def of(x) -> "Weight":
        if isinstance(x, PowerProduct):
            return x
        f = rat(x)
        if f <= 0:
            raise ValueError("weights are positive")
        return f

    @staticmethod
    def make(coeff, exps) -> "Weight":
        v = PowerProduct(rat(coeff), exps)
        if not v.exps:
            return v.coeff
        return v

    @staticmethod
    def int_power(base: int, exponent: Fraction) -> "Weight":
        """Exact base**exponent for a positive integer base."""
        if base <= 0:
            raise ValueError("positive base required")
        exps: dict[int, Fraction] = {}
        for p, e in factorint(base):
            exps[p] = exps.get(p, Fraction(0)) + Fraction(exponent) * e
        return PowerProduct.make(Fraction(1), exps)

    def __mul__(self, other):
        if isinstance(other, PowerProduct):
            exps = dict(self.exps)
            for p, e in other.exps.items():
                exps[p] = exps.get(p, Fraction(0)) + e
            return PowerProduct.make(self.coeff * other.coeff, exps)
        if isinstance(other, (int, Fraction)):
            f = rat(other)
            if f <= 0:
                raise ValueError("weights stay positive")
            return PowerProduct.make(self.coeff * f, self.exps)
        return NotImplemented

    __rmul__ = __mul__

    def log(self) -> Scalar:
        out: Scalar = LogLin.ln(self.coeff)
        for p, e in self.exps.items():
            out = out + LogLin(Fraction(0), {p: e})
        return out

    def __eq__(self, other):
        if isinstance(other, PowerProduct):
            return self.coeff == other.coeff and self.exps == other.exps
        if isinstance(other, (int, Fraction)):
            return not self.exps and self.coeff == rat(other)
        return NotImplemented

    def __hash__(self):
        return hash((self.coeff, tuple(sorted(self.exps.items()))))

    def __repr__(self):
        parts = "*".join(f"{p}^({e})" for p, e in sorted(self.exps.items()))
        return f"PowerProduct({self.coeff}*{parts})"


Weight = Union[Fraction, PowerProduct]


def weight_mul(a: Weight, b: Weight) -> Weight:
    if isinstance(a, PowerProduct) or isinstance(b, PowerProduct):
        pa = a if isinstance(a, PowerProduct) else PowerProduct(rat(a), {})
        return pa * b
    f = rat(a) * rat(b)
    if f <= 0:
        raise ValueError("weights stay positive")
    return f


def weight_add(a: Weight, b: Weight) -> Weight:
    """Addition is only defined where it stays exact (matching power parts)."""
    if isinstance(a, PowerProduct) or isinstance(b, PowerProduct):
        pa = a if isinstance(a, PowerProduct) else PowerProduct(rat(a), {})
        pb = b if isinstance(b, PowerProduct) else PowerProduct(rat(b), {})
        if pa.exps != pb.exps:
            raise ValueError("cannot merge weights with different power parts")
        return PowerProduct.make(pa.coeff + pb.coeff, pa.exps)
    return rat(a) + rat(b)


def weight_log(w: Weight) -> Scalar:
    if isinstance(w, PowerProduct):
        return w.log()
    return LogLin.ln(rat(w))
