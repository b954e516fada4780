"""Exception hierarchy shared by all btnav modules."""


class BtnavError(Exception):
    """Base class for every error this package raises deliberately."""


class ConfigError(BtnavError):
    """A scenario or world definition violates an invariant.

    Messages start with the offending field path, e.g.
    ``device[1].addr: duplicate address AA:BB:CC:DD:EE:FF``.
    """


class UnknownSensor(BtnavError):
    pass


class UnknownDevice(BtnavError):
    pass


class InvalidReport(BtnavError):
    """A scan report violates a type invariant and cannot be encoded."""


class ParseError(BtnavError):
    """Wire bytes rejected by the report decoder."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class NotDue(BtnavError):
    """A scan cycle was requested before the sensor's scheduled time."""


class DuplicateRow(BtnavError):
    """Committing a report would replay an existing (sensor, seq, addr) row."""


class PositioningError(BtnavError):
    pass


class InsufficientAnchors(PositioningError):
    pass


class DegenerateGeometry(PositioningError):
    pass


class NoConvergence(PositioningError):
    pass


class NoObservations(PositioningError):
    pass


class EmptyMap(PositioningError):
    pass


class InvalidParams(PositioningError):
    pass


class InvalidCellSize(PositioningError):
    pass


class NonMonotoneTimestamp(BtnavError):
    pass
