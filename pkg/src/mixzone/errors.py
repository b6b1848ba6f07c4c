"""Exception and warning types."""


class MixZoneError(ValueError):
    """Base class for validation failures."""


class NotSquare(MixZoneError):
    pass


class NegativeEntry(MixZoneError):
    pass


class NonStochasticRow(MixZoneError):
    def __init__(self, row: int, total: float):
        self.row = row
        self.total = total
        super().__init__(f"row {row} sums to {total!r}, expected 1")


class DimensionMismatch(MixZoneError):
    pass


class InvalidThreshold(MixZoneError):
    pass


class InvalidWindow(MixZoneError):
    pass


class InvalidConfig(MixZoneError):
    pass


class InvalidScenario(MixZoneError):
    pass


class WrongLane(MixZoneError):
    pass


class TooLarge(MixZoneError):
    pass


class ParseError(MixZoneError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class ValidationError(MixZoneError):
    """Scenario failed validation; ``cause`` holds the underlying zone error."""

    def __init__(self, cause: Exception):
        self.cause = cause
        super().__init__(f"{type(cause).__name__}: {cause}")


class DegenerateRowWarning(UserWarning):
    """An ingress row carries no mapping weight (empty ingress lane)."""
