"""Exception hierarchy shared across the package."""


class EqaError(Exception):
    """Base class for all package errors."""


class DataError(EqaError):
    """Malformed or inconsistent input data (CLI exit code 2)."""


class SceneParseError(DataError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class SceneInvariantError(DataError):
    def __init__(self, invariant, detail=""):
        self.invariant = invariant
        msg = f"invariant violated: {invariant}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class BlockedPathError(EqaError):
    """No collision-free path exists toward the requested waypoint."""


class UnreachableError(EqaError):
    """Two positions are not connected through free space."""


class RoomNotVisibleError(EqaError):
    pass


class ScoreRangeError(ValueError, EqaError):
    pass


class DuplicateEntryError(EqaError):
    pass


class UnknownTargetError(KeyError, EqaError):
    pass


class ScorerError(EqaError):
    """Retryable failure talking to a live scoring endpoint."""


class EndpointError(EqaError):
    """Non-recoverable live endpoint failure (CLI exit code 3)."""


class ZeroVectorError(ValueError, EqaError):
    pass


class DimensionMismatchError(ValueError, EqaError):
    pass


class GenerationError(DataError):
    """The generator could not satisfy its layout constraints."""
