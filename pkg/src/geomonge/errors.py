"""Exception hierarchy. Every error carries a stable ``code`` string."""


class GeoMongeError(Exception):
    code = "GEOMONGE_ERROR"

    def __init__(self, message="", **details):
        super().__init__(message or self.code)
        self.details = details


class InfiniteDistance(GeoMongeError):
    code = "INFINITE_DISTANCE"


class AmbiguousGeodesic(GeoMongeError):
    code = "AMBIGUOUS_GEODESIC"


class InfeasibleMass(GeoMongeError):
    code = "INFEASIBLE_MASS"


class NoFiniteCoupling(GeoMongeError):
    code = "NO_FINITE_COUPLING"


class NegativeCycle(GeoMongeError):
    code = "NEGATIVE_CYCLE"


class NonmonotoneInput(GeoMongeError):
    code = "NONMONOTONE_INPUT"


class BranchingDetected(GeoMongeError):
    code = "BRANCHING_DETECTED"


class EquivalenceFailure(GeoMongeError):
    code = "EQUIVALENCE_FAILURE"


class MassOffRays(GeoMongeError):
    code = "MASS_OFF_RAYS"


class MassMismatch(GeoMongeError):
    code = "MASS_MISMATCH"


class RayMismatch(GeoMongeError):
    code = "RAY_MISMATCH"


class ParamUndefined(GeoMongeError):
    code = "PARAM_UNDEFINED"


class MissingDensity(GeoMongeError):
    code = "MISSING_DENSITY"


class OrderViolation(GeoMongeError):
    code = "ORDER_VIOLATION"


class DivisionByZeroCell(GeoMongeError):
    code = "DIVISION_BY_ZERO_CELL"


class DomainError(GeoMongeError):
    code = "DOMAIN"


class EndpointMissing(GeoMongeError):
    code = "ENDPOINT_MISSING"


class StageError(GeoMongeError):
    """Wraps an error raised inside a scenario stage."""

    code = "STAGE_ERROR"

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause.code if isinstance(cause, GeoMongeError) else type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
