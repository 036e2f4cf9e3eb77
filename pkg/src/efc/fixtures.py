"""Named built-in measures used by the CLI, the test suite and the docs.

FIX-SEG   two unit atoms at 0 and 1 on the line.
FIX-TRI   unit atoms at the corners of the triangle (0,0), (2,0), (0,2).
FIX-LINE  unit atoms at (0,0) and (1,1); the span of the support is a line.
FIX-RAY   a unit atom at (0,1) plus atoms (k, 0) with weights k^-2.
FIX-EX3D  a unit atom at (-1,0,0), atoms (0,k,0) with weights k^-2, and
          atoms (k,k^2,-1) with weights 2 k^-3; its log-partition domain is
          {t2 < 0} union {t2 = 0, t1 <= 0}.
"""

from __future__ import annotations

from fractions import Fraction as F

from .measures import Atom, CurveFamily, MixedMeasure, RayFamily, validate


def _seg() -> MixedMeasure:
    return MixedMeasure(1, (Atom((F(0),), F(1)), Atom((F(1),), F(1))))


def _tri() -> MixedMeasure:
    return MixedMeasure(2, (Atom((F(0), F(0)), F(1)),
                            Atom((F(2), F(0)), F(1)),
                            Atom((F(0), F(2)), F(1))))


def _line() -> MixedMeasure:
    return MixedMeasure(2, (Atom((F(0), F(0)), F(1)),
                            Atom((F(1), F(1)), F(1))))


def _ray() -> MixedMeasure:
    return MixedMeasure(
        2,
        (Atom((F(0), F(1)), F(1)),),
        (RayFamily((F(0), F(0)), (F(1), F(0)), F(1), F(2), F(1)),),
    )


def _ex3d() -> MixedMeasure:
    return MixedMeasure(
        3,
        (Atom((F(-1), F(0), F(0)), F(1)),),
        (RayFamily((F(0), F(0), F(0)), (F(0), F(1), F(0)), F(1), F(2), F(1)),),
        (CurveFamily((F(0), F(0), F(-1)), (F(1), F(0), F(0)), (F(0), F(1), F(0)),
                     F(1), F(3), F(2)),),
    )


_BUILDERS = {
    "FIX-SEG": _seg,
    "FIX-TRI": _tri,
    "FIX-LINE": _line,
    "FIX-RAY": _ray,
    "FIX-EX3D": _ex3d,
}

FIXTURE_NAMES = tuple(sorted(_BUILDERS))


def fixture(name: str) -> MixedMeasure:
    key = name.upper()
    if key not in _BUILDERS:
        from .errors import InvalidInput
        raise InvalidInput(f"unknown fixture {name!r}; known: {', '.join(FIXTURE_NAMES)}")
    return validate(_BUILDERS[key]())
