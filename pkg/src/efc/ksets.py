"""Exact subsets of the family index range k = 1, 2, ...

Every region an atom family meets (flats, halfspaces, polyhedra, argmax
sets) cuts out a set of indices of the form ``finite ∪ {k >= tail}``; this
module computes them from linear and quadratic integer conditions by exact
sign evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional

_SCAN_CAP = 200_000


@dataclass(frozen=True)
class KSet:
    finite: tuple[int, ...]          # sorted, each < tail (when tail is set)
    tail: Optional[int] = None       # all k >= tail included

    @staticmethod
    def all() -> "KSet":
        return KSet((), 1)

    @staticmethod
    def empty() -> "KSet":
        return KSet((), None)

    @staticmethod
    def of(ks) -> "KSet":
        return KSet(tuple(sorted(set(int(k) for k in ks))), None)

    def normalized(self) -> "KSet":
        if self.tail is None:
            return KSet(tuple(sorted(set(self.finite))), None)
        fin = tuple(sorted(k for k in set(self.finite) if k < self.tail))
        return KSet(fin, self.tail)

    def contains(self, k: int) -> bool:
        if k < 1:
            return False
        if self.tail is not None and k >= self.tail:
            return True
        return k in self.finite

    @property
    def is_empty(self) -> bool:
        return not self.finite and self.tail is None

    @property
    def is_all(self) -> bool:
        s = self.normalized()
        if s.tail is None:
            return False
        return all(s.contains(k) for k in range(1, s.tail))

    def intersect(self, other: "KSet") -> "KSet":
        a, b = self.normalized(), other.normalized()
        tail = None
        if a.tail is not None and b.tail is not None:
            tail = max(a.tail, b.tail)
        cands = set(a.finite) | set(b.finite)
        if a.tail is not None and b.tail is None:
            cands |= set(b.finite)
        if b.tail is not None and a.tail is None:
            cands |= set(a.finite)
        fin = sorted(k for k in cands
                     if a.contains(k) and b.contains(k)
                     and (tail is None or k < tail))
        return KSet(tuple(fin), tail)

    def iter_finite(self) -> Iterator[int]:
        return iter(self.finite)

    def min_element(self) -> Optional[int]:
        cands = []
        if self.finite:
            cands.append(self.finite[0])
        if self.tail is not None:
            cands.append(self.tail)
        return min(cands) if cands else None


def _sign(x: Fraction) -> int:
    return -1 if x < 0 else (1 if x > 0 else 0)


def _rel_match(sign: int, rel: str) -> bool:
    return {
        "lt": sign < 0,
        "le": sign <= 0,
        "eq": sign == 0,
        "ge": sign >= 0,
        "gt": sign > 0,
    }[rel]


def kset_from_quadratic(a2: Fraction, a1: Fraction, a0: Fraction, rel: str) -> KSet:
    """{k >= 1 : a2 k^2 + a1 k + a0 REL 0} with REL in lt/le/eq/ge/gt."""
    a2, a1, a0 = Fraction(a2), Fraction(a1), Fraction(a0)
    if a2 == 0 and a1 == 0:
        return KSet.all() if _rel_match(_sign(a0), rel) else KSet.empty()
    # beyond every real root the sign is constant and equal to the sign of
    # the leading coefficient
    if a2 != 0:
        bound = 1 + max(abs(a1), abs(a0)) / abs(a2)
        lead = _sign(a2)
    else:
        bound = 1 + abs(a0) / abs(a1)
        lead = _sign(a1)
    start_tail = max(1, int(bound) + 2)
    if start_tail > _SCAN_CAP:
        raise ValueError("quadratic root bound beyond scan cap")
    fin = []
    for k in range(1, start_tail):
        if _rel_match(_sign(a2 * k * k + a1 * k + a0), rel):
            fin.append(k)
    tail = start_tail if _rel_match(lead, rel) else None
    return KSet(tuple(fin), tail).normalized()


def kset_from_linear(a1: Fraction, a0: Fraction, rel: str) -> KSet:
    return kset_from_quadratic(Fraction(0), a1, a0, rel)
