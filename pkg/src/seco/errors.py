"""Exception types raised by the library."""


class SecoError(ValueError):
    """Base class for all library errors."""


class ZeroVectorError(SecoError):
    pass


class EmptyInputError(SecoError):
    pass


class NonPositiveTemperatureError(SecoError):
    pass


class ShapeMismatchError(SecoError):
    pass


class LengthMismatchError(ShapeMismatchError):
    pass


class InvalidThresholdError(SecoError):
    pass


class PatchLargerThanImageError(SecoError):
    pass


class MaskShapeMismatchError(ShapeMismatchError):
    pass


class UninitializedPrototypeError(SecoError):
    pass


class MissingPrototypeError(SecoError):
    pass


class BatchExceedsCapacityError(SecoError):
    pass


class NoPositivesError(SecoError):
    pass


class NonFiniteComponentError(SecoError):
    pass


class NoTruePositivesError(SecoError):
    pass


class InvalidConfigError(SecoError):
    pass


class SnapshotError(SecoError):
    """Snapshot is unreadable, corrupted or from an incompatible version."""
