class EpasError(Exception):
    pass


class ContractViolationError(EpasError, ValueError):
    pass


class DegenerateMetricError(EpasError):
    pass


class MetricError(EpasError):
    pass


class SymmetryError(MetricError):
    pass


class TriangleInequalityError(MetricError):
    pass


class ZeroDistanceError(MetricError):
    pass


class SchemaError(EpasError):
    pass


class UnsupportedVariantError(EpasError):
    pass


class ResourceLimitError(EpasError):
    pass


class InfeasibleInstanceError(EpasError):
    pass


class DegenerateSamplingError(EpasError):
    pass


class PremiseError(EpasError):
    pass
