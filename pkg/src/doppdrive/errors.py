"""Exception types shared across the package."""


class DoppDriveError(Exception):
    """Base class for all package errors."""


class DegeneratePoint(DoppDriveError, ValueError):
    """A point sits on the radar's vertical axis, so its azimuth is undefined."""


class NonMonotonicTimestamps(DoppDriveError, ValueError):
    pass


class InsufficientPoints(DoppDriveError, ValueError):
    pass


class NoConsensus(DoppDriveError, RuntimeError):
    """Robust ego-velocity fit found too few inliers to be trusted."""


class InvalidResolution(DoppDriveError, ValueError):
    pass


class EmptyHistogram(DoppDriveError, ValueError):
    pass


class InvalidScenario(DoppDriveError, ValueError):
    pass


class UnknownPoint(DoppDriveError, KeyError):
    pass


class MissingGroundTruth(DoppDriveError, KeyError):
    pass


class WindowMismatch(DoppDriveError, ValueError):
    pass


class FormatError(DoppDriveError, ValueError):
    """Malformed input file; carries the location when it is known."""

    def __init__(self, message: str, source: str = "<input>", line: int | None = None, column: int | None = None):
        self.source, self.line, self.column = source, line, column
        where = source
        if line is not None:
            where += f":{line}"
            if column is not None:
                where += f":{column}"
        super().__init__(f"{where}: {message}")
