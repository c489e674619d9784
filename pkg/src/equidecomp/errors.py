"""Exception types raised across the package."""


class EquidecompError(Exception):
    """Base class for all package errors."""


class NotSymmetric(EquidecompError):
    pass


class CoverageImpossible(EquidecompError):
    pass


class DegreeOverflow(EquidecompError):
    pass


class NotFound(EquidecompError):
    pass


class PartitionMismatch(EquidecompError):
    pass


class SetsOverlap(EquidecompError):
    pass


class MeasureMismatch(EquidecompError):
    pass


class StraddlesSides(EquidecompError):
    pass


class InvalidMatching(EquidecompError):
    pass


class SyntheticModeUnsupported(EquidecompError):
    pass
