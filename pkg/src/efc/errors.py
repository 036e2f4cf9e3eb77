"""Shared error hierarchy; exit codes follow the CLI contract."""


class EfcError(Exception):
    exit_code = 1
    code = "error"

    def payload(self) -> dict:
        return {"error": self.code, "message": str(self)}


class InvalidInput(EfcError):
    exit_code = 2
    code = "invalid_input"


class Unsupported(EfcError):
    exit_code = 3
    code = "unsupported"


class PrecisionUnreachableError(EfcError):
    exit_code = 4
    code = "precision_unreachable"


class ZeroWeight(InvalidInput):
    code = "zero_weight"


class InfiniteMass(InvalidInput):
    code = "infinite_mass"


class DuplicateAtomInFamily(InvalidInput):
    code = "duplicate_atom_in_family"


class EmptyRestriction(InvalidInput):
    code = "empty_restriction"


class DomainViolation(InvalidInput):
    code = "domain_violation"


class DirectionLeavesDomain(InvalidInput):
    code = "direction_leaves_domain"


class NotSupporting(InvalidInput):
    code = "not_supporting"


class NotInLin(InvalidInput):
    code = "direction_outside_face_span"


class ZeroDirection(InvalidInput):
    code = "zero_direction"


class UnboundedDirectionError(InvalidInput):
    code = "unbounded_direction"


class ThetaNotInRelativeInterior(InvalidInput):
    code = "theta_not_in_relative_interior"


class RelativeBoundaryDegenerate(InvalidInput):
    code = "relative_boundary_degenerate"


class NotDominated(InvalidInput):
    code = "not_dominated"


class ProbeOutOfRange(InvalidInput):
    code = "probe_out_of_range"


class NonPolyhedral(Unsupported):
    code = "non_polyhedral"


class SearchIncomplete(Unsupported):
    code = "search_incomplete"
