class BeatVaeError(Exception):
    """Base class for all package errors."""


class WfdbFormatError(BeatVaeError, ValueError):
    pass


class ShapeError(BeatVaeError, ValueError):
    pass


class DataError(BeatVaeError):
    """Missing or unusable input data."""


class NumericalError(BeatVaeError, ArithmeticError):
    pass


class ArtifactError(BeatVaeError):
    """Malformed or incompatible model artifact."""
