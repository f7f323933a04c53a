"""Exception taxonomy shared by all modules."""


class MmadoaError(Exception):
    """Base class for all package errors."""


class ArgError(MmadoaError, ValueError):
    """Invalid argument value (bad count, empty list, out-of-range index)."""


class IngestError(MmadoaError):
    """Calibration file cannot be parsed into a complete dataset."""


class GridError(MmadoaError):
    """Angle grid violates uniformity or an angle is not a grid point."""


class PlanError(MmadoaError):
    """Sector plan does not tile the field of view, or a sector/overlap has no samples."""


class SingularityError(MmadoaError):
    """A matrix required to be invertible is numerically rank deficient."""


class DomainError(MmadoaError, ValueError):
    """Angle outside the model's field of view."""


class DegenerateDataError(MmadoaError):
    """Data with zero norm where a relative error is requested."""


class SchemaError(MmadoaError):
    """Inputs are individually valid but dimensionally incompatible."""
