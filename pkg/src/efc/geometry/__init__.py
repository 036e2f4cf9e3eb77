"""Exact rational linear algebra and polyhedral geometry."""

from .linalg import (AffineFlat, Vec, add, affine_hull, dot, in_span,
                     independent_subset, is_zero, norm_sq, nullspace,
                     primitive, project, project_onto_span, rank, scale,
                     solve, sub, vec, zeros)
from .polyhedra import (MAX_AMBIENT_DIM, EmptyPolyhedron, Eq, GeometryError,
                        Ineq, PolyFace, Polyhedron, RelativeInterior,
                        UnboundedDirection, exposed_face, exposing_cone,
                        face_lattice, fm_eliminate_var, fm_project,
                        generators, hull_polyhedron, lp, pdot, ri_query)
from .simplex import EQ, LE, LT, LPResult, Row, feasible_point, solve_lp, strict_feasible_point

__all__ = [
    "AffineFlat", "Vec", "add", "affine_hull", "dot", "in_span",
    "independent_subset", "is_zero", "norm_sq", "nullspace", "primitive",
    "project", "project_onto_span", "rank", "scale", "solve", "sub", "vec",
    "zeros", "MAX_AMBIENT_DIM", "EmptyPolyhedron", "Eq", "GeometryError",
    "Ineq", "PolyFace", "Polyhedron", "RelativeInterior",
    "UnboundedDirection", "exposed_face", "exposing_cone", "face_lattice",
    "fm_eliminate_var", "fm_project", "generators", "hull_polyhedron", "lp",
    "pdot", "ri_query", "EQ", "LE", "LT", "LPResult", "Row", "feasible_point",
    "solve_lp", "strict_feasible_point",
]
