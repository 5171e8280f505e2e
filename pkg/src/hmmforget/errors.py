"""Exception hierarchy shared by every module."""


class HmmError(ValueError):
    """Base class for contract violations raised by this package."""


class NonStochastic(HmmError):
    pass


class NotIrreducible(HmmError):
    pass


class DimensionMismatch(HmmError):
    pass


class SymbolOutOfRange(HmmError):
    pass


class WindowTooLong(HmmError):
    pass


class WindowTooShort(HmmError):
    pass


class NonPositiveInput(HmmError):
    pass


class TooLarge(HmmError):
    pass


class InsufficientData(HmmError):
    pass


class DegenerateDeterminant(HmmError):
    pass


class DegenerateDirection(HmmError):
    pass


class DegenerateParameters(HmmError):
    pass


class InvalidEpsilon(HmmError):
    pass


class OutsideValidity(HmmError):
    pass


class ContractionFailure(HmmError):
    pass


class SchemaError(HmmError):
    """Raised by the config loader; ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")
