"""Exception types raised across the package."""


class PaprlError(Exception):
    """Base class for all package errors."""


class DuplicateClass(PaprlError):
    pass


class UnknownClass(PaprlError):
    pass


class UnknownObject(PaprlError):
    pass


class OutOfRangeAttribute(PaprlError):
    pass


class NoActiveObjects(PaprlError):
    pass


class ContactFault(PaprlError):
    """Collision resolution requested for a ball that is not touching the wall."""


class DimensionMismatch(PaprlError, ValueError):
    pass


class NumericalFault(PaprlError, FloatingPointError):
    """A parameter update produced non-finite values."""


class EmptyBuffer(PaprlError):
    pass


class NonFiniteState(PaprlError, ValueError):
    pass


class InsufficientData(PaprlError):
    pass


class ColdModel(PaprlError):
    """Prediction requested from a transition model that has never been trained."""


class InactiveObject(PaprlError):
    pass


class RewardOutOfRange(PaprlError, ValueError):
    pass


class WindowNotFull(PaprlError):
    pass


class ConfigError(PaprlError):
    """Invalid run configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class SchemaMismatch(PaprlError):
    pass
