"""Exception hierarchy shared across the toolkit.

The CLI maps these onto distinct exit codes, so keep the split between
configuration problems, malformed input data, and geometry outcomes.
"""


class ChirplocError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ChirplocError):
    """Invalid or inconsistent configuration (bad spec values, overlapping
    chirp bands, channel-count mismatches, ...)."""


class DataError(ChirplocError):
    """Malformed input data: unreadable WAV files, empty signals, recordings
    that cannot hold the expected sequence."""


class DetectionError(DataError):
    """One or more chirps could not be detected in a recording.

    ``missing`` lists the speaker/channel indices without a detection.
    """

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = tuple(missing)


class GeometryError(ChirplocError):
    """Unsolvable or degenerate constellation geometry."""
